//! Policy cuts `||a - a_r||_1 >= 1` over binary upgrade vectors.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{CombinationRow, Plan};

/// Excludes exactly the binary point `a_r`:
/// `sum_{a_r,i = 0} a_i + sum_{a_r,i = 1} (1 - a_i) >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyCut {
    pub a_r: Plan,
}

impl PolicyCut {
    /// Left-hand side of the cut at `a`; the cut holds when it is `>= 1`.
    pub fn value(&self, a: &[f64]) -> f64 {
        self.a_r
            .bits()
            .iter()
            .zip(a)
            .map(|(&r, &x)| if r { 1.0 - x } else { x })
            .sum()
    }

    pub fn excludes(&self, a: &[f64]) -> bool {
        self.value(a) < 1.0 - 1e-9
    }

    /// The cut as a row `coeffs . a <= rhs`:
    /// `-sum_{r=0} a_i + sum_{r=1} a_i <= |a_r| - 1`.
    pub fn row(&self) -> CombinationRow {
        let bits = self.a_r.bits();
        CombinationRow {
            coeffs: bits
                .iter()
                .enumerate()
                .map(|(i, &r)| (i, if r { 1.0 } else { -1.0 }))
                .collect(),
            rhs: self.a_r.count() as f64 - 1.0,
        }
    }
}

/// Builds the cut for a binary plan; fractional entries are rejected.
pub fn make_policy_cut(a_r: &[f64]) -> Result<PolicyCut> {
    Ok(PolicyCut {
        a_r: Plan::from_values(a_r)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_row() {
        let cut = make_policy_cut(&[0.0, 1.0, 0.0]).unwrap();
        // a1 + (1 - a2) + a3 >= 1  <=>  -a1 + a2 - a3 <= 0
        let row = cut.row();
        assert_eq!(row.coeffs, vec![(0, -1.0), (1, 1.0), (2, -1.0)]);
        assert_eq!(row.rhs, 0.0);
        assert!(cut.excludes(&[0.0, 1.0, 0.0]));
        assert!(!cut.excludes(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn all_zero_requires_an_upgrade() {
        let cut = make_policy_cut(&[0.0; 4]).unwrap();
        let row = cut.row();
        assert!(row.coeffs.iter().all(|&(_, c)| c == -1.0));
        assert_eq!(row.rhs, -1.0);
    }

    #[test]
    fn fractional_rejected() {
        assert!(make_policy_cut(&[0.5, 1.0]).is_err());
    }
}
