//! Staggered-grid difference operators.
//!
//! Positions and linear momenta live on the `N + 1` nodes, angles and
//! element strains on the `N` elements, curvatures and couples on the
//! `N - 1` interior nodes. [`dtilde`] maps an element-like field of length
//! `M` to a node-like field of length `M + 1`; [`dbar`] and [`node_diff`]
//! both take forward differences and shrink the length by one. The two
//! families are negative transposes of each other:
//!
//! ```text
//! sum_i <a_i, dtilde(b)_i> = -sum_j <node_diff(a)_j, b_j>
//! ```
//!
//! None of the operators divide by the grid spacing; callers apply `1/ds`.

use std::ops::{Neg, Sub};

use crate::error::{Result, SolverError};

/// Where the samples of a staggered field sit on the rod.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Node,
    Element,
    Interior,
}

impl FieldKind {
    /// Number of samples on a rod with `segments` elements.
    pub fn len(self, segments: usize) -> usize {
        match self {
            FieldKind::Node => segments + 1,
            FieldKind::Element => segments,
            FieldKind::Interior => segments.saturating_sub(1),
        }
    }
}

/// A field sampled on one of the three staggered locations.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField<T> {
    kind: FieldKind,
    values: Vec<T>,
}

impl<T> StaggeredField<T> {
    pub fn new(kind: FieldKind, segments: usize, values: Vec<T>) -> Result<Self> {
        let expected = kind.len(segments);
        if values.len() != expected {
            return Err(SolverError::Size {
                what: "staggered field",
                got: values.len(),
                expected,
            });
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Element-to-node difference: `[b1, b2 - b1, ..., bM - b(M-1), -bM]`.
pub fn dtilde<T>(b: &[T]) -> Result<Vec<T>>
where
    T: Copy + Sub<Output = T> + Neg<Output = T>,
{
    if b.is_empty() {
        return Err(SolverError::Size {
            what: "dtilde input",
            got: 0,
            expected: 1,
        });
    }
    let mut out = Vec::with_capacity(b.len() + 1);
    out.push(b[0]);
    out.extend(b.windows(2).map(|w| w[1] - w[0]));
    out.push(-b[b.len() - 1]);
    Ok(out)
}

/// Forward difference of an element-like field: `c_l = b_(l+1) - b_l`.
pub fn dbar<T>(b: &[T]) -> Result<Vec<T>>
where
    T: Copy + Sub<Output = T>,
{
    if b.len() < 2 {
        return Err(SolverError::Size {
            what: "dbar input",
            got: b.len(),
            expected: 2,
        });
    }
    Ok(b.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Forward difference of a node field onto the elements between them.
pub fn node_diff<T>(a: &[T]) -> Result<Vec<T>>
where
    T: Copy + Sub<Output = T>,
{
    if a.len() < 2 {
        return Err(SolverError::Size {
            what: "node_diff input",
            got: a.len(),
            expected: 2,
        });
    }
    Ok(a.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Allocation-free [`dtilde`]; `out.len()` must equal `b.len() + 1`.
pub(crate) fn dtilde_into<T>(b: &[T], out: &mut [T])
where
    T: Copy + Sub<Output = T> + Neg<Output = T>,
{
    debug_assert_eq!(out.len(), b.len() + 1);
    let m = b.len();
    out[0] = b[0];
    for i in 1..m {
        out[i] = b[i] - b[i - 1];
    }
    out[m] = -b[m - 1];
}

/// Allocation-free forward difference; `out.len()` must equal `a.len() - 1`.
pub(crate) fn diff_into<T>(a: &[T], out: &mut [T])
where
    T: Copy + Sub<Output = T>,
{
    debug_assert_eq!(out.len() + 1, a.len());
    for (o, w) in out.iter_mut().zip(a.windows(2)) {
        *o = w[1] - w[0];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn dtilde_scalar() {
        assert_eq!(dtilde(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 1.0, 1.0, -3.0]);
    }

    #[test]
    fn dtilde_constant_telescopes() {
        let c = 2.5;
        assert_eq!(dtilde(&[c; 5]).unwrap(), vec![c, 0.0, 0.0, 0.0, 0.0, -c]);
    }

    #[test]
    fn dtilde_vectors_componentwise() {
        let b = [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
        assert_eq!(
            dtilde(&b).unwrap(),
            vec![
                Vector2::new(1.0, 0.0),
                Vector2::new(-1.0, 1.0),
                Vector2::new(0.0, -1.0)
            ]
        );
    }

    #[test]
    fn dtilde_single_entry() {
        assert_eq!(dtilde(&[4.0]).unwrap(), vec![4.0, -4.0]);
    }

    #[test]
    fn dbar_examples() {
        assert_eq!(dbar(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(dbar(&[7.0; 4]).unwrap(), vec![0.0; 3]);
        assert_eq!(dbar(&[0.0, 5.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn node_diff_examples() {
        assert_eq!(node_diff(&[0.0, 1.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(node_diff(&[1.5; 3]).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn straight_rod_positions_give_unit_tangents() {
        let ds = 0.01;
        let r: Vec<_> = (0..6).map(|i| Vector2::new(i as f64 * ds, 0.0)).collect();
        for t in node_diff(&r).unwrap() {
            let t = t / ds;
            assert!((t - Vector2::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sizing_errors() {
        assert!(dtilde::<f64>(&[]).is_err());
        assert!(dbar(&[1.0]).is_err());
        assert!(node_diff(&[1.0]).is_err());
    }

    #[test]
    fn staggered_field_checks_length() {
        assert!(StaggeredField::new(FieldKind::Node, 4, vec![0.0; 5]).is_ok());
        assert!(StaggeredField::new(FieldKind::Interior, 4, vec![0.0; 4]).is_err());
        assert_eq!(FieldKind::Element.len(4), 4);
    }
}
