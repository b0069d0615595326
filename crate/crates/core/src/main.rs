fn main() -> std::process::ExitCode {
    gridplan::cli::main()
}
