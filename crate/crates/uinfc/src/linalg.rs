//! Fixed-dimension vectors for states and controls, the input box, and a few
//! slice helpers used by the numerical routines.

use std::ops::Deref;

use crate::error::{Error, Result};

fn check_components(what: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::param(format!("{what} must have at least one component")));
    }
    if let Some(i) = v.iter().position(|c| !c.is_finite()) {
        return Err(Error::param(format!("{what} component {i} is not finite")));
    }
    Ok(())
}

macro_rules! real_vector {
    ($name:ident, $what:literal) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(components: Vec<f64>) -> Result<Self> {
                check_components($what, &components)?;
                Ok(Self(components))
            }

            pub fn zeros(n: usize) -> Self {
                assert!(n >= 1, concat!($what, " dimension must be at least 1"));
                Self(vec![0.0; n])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn norm(&self) -> f64 {
                norm(&self.0)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;

            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }

        impl TryFrom<&[f64]> for $name {
            type Error = Error;

            fn try_from(v: &[f64]) -> Result<Self> {
                Self::new(v.to_vec())
            }
        }
    };
}

real_vector!(StateVec, "state vector");
real_vector!(ControlVec, "control vector");

/// Axis-aligned compact box of admissible controls.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::param(format!(
                "box bounds must be nonempty with equal lengths (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::param(format!("box bound {i} is not finite")));
            }
            if lo > hi {
                return Err(Error::param(format!("box is empty along axis {i}: {lo} > {hi}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The box `[-b, b]^m`.
    pub fn symmetric(m: usize, b: f64) -> Result<Self> {
        Self::new(vec![-b; m], vec![b; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn clamp(&self, u: &mut [f64]) {
        for (x, (lo, hi)) in u.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// All `2^m` corners, ordered by the binary expansion of the index
    /// (bit `j` set selects the upper bound on axis `j`).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|mask| (0..m).map(|j| if mask >> j & 1 == 1 { self.upper[j] } else { self.lower[j] }).collect())
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonfinite_and_empty() {
        assert!(StateVec::new(vec![]).is_err());
        assert!(StateVec::new(vec![1.0, f64::NAN]).is_err());
        assert!(ControlVec::new(vec![f64::INFINITY]).is_err());
        assert_eq!(StateVec::new(vec![3.0, 4.0]).unwrap().norm(), 5.0);
    }

    #[test]
    fn box_validation_and_vertices() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSet::new(vec![], vec![]).is_err());
        let b = BoxSet::symmetric(2, 3.0).unwrap();
        let v = b.vertices();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], vec![-3.0, -3.0]);
        assert_eq!(v[1], vec![3.0, -3.0]);
        assert_eq!(v[3], vec![3.0, 3.0]);
        assert_eq!(b.midpoint(), vec![0.0, 0.0]);
        let mut u = vec![5.0, -7.0];
        b.clamp(&mut u);
        assert_eq!(u, vec![3.0, -3.0]);
        assert!(b.contains(&u));
    }
}
