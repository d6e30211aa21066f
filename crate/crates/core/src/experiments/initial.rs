//! Initial configurations built from a curvature profile.

use crate::rod::{RodProperties, RodState, Vec2};

use super::config::Bump;

/// Curvature `kappa(s) = sum_i M_i exp(-(s - s_i)^2 / (2 sigma_i^2))`.
pub fn bump_curvature(bumps: &[Bump], s: f64) -> f64 {
    bumps
        .iter()
        .map(|b| {
            let z = (s - b.center) / b.width;
            b.magnitude * (-0.5 * z * z).exp()
        })
        .sum()
}

/// Rod at rest whose curvature follows `bumps`, unstretched, with its base
/// node at the origin.
///
/// Element angles are `int_0^s kappa` at the element midpoints (composite
/// Simpson on a sub-grid), positions follow by stepping `ds (cos, sin)`
/// from the base.
pub fn initial_bent_state(bumps: &[Bump], props: &RodProperties) -> RodState {
    let mut state = RodState::straight(props);
    if bumps.is_empty() {
        return state;
    }
    let ds = props.ds;
    let kappa = |s: f64| bump_curvature(bumps, s);
    let simpson = |a: f64, b: f64| {
        const PANELS: usize = 16;
        let h = (b - a) / PANELS as f64;
        let mut sum = kappa(a) + kappa(b);
        for i in 1..PANELS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * kappa(a + i as f64 * h);
        }
        sum * h / 3.0
    };

    let mut angle = simpson(0.0, 0.5 * ds);
    for j in 0..props.segments() {
        if j > 0 {
            angle += simpson(props.element_s(j - 1), props.element_s(j));
        }
        state.theta[j] = angle;
    }
    for j in 0..props.segments() {
        let (s, c) = state.theta[j].sin_cos();
        state.r[j + 1] = state.r[j] + Vec2::new(c, s) * ds;
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{compute_strains, RodParameters};

    #[test]
    fn no_bumps_is_straight() {
        let p = RodProperties::new(RodParameters::default()).unwrap();
        assert_eq!(initial_bent_state(&[], &p), RodState::straight(&p));
    }

    #[test]
    fn wide_bump_gives_an_arc() {
        // a very wide bump is a constant curvature over the rod
        let p = RodProperties::new(RodParameters::default()).unwrap();
        let k0 = 5.0;
        let bumps = [Bump {
            magnitude: k0,
            center: 0.1,
            width: 1e6,
        }];
        let state = initial_bent_state(&bumps, &p);
        // chord of an arc of radius 1/k0 from the base tangent
        let l = p.params.length;
        let exact = Vec2::new((k0 * l).sin(), 1.0 - (k0 * l).cos()) / k0;
        assert!((state.tip() - exact).norm() < 1e-4, "{:?}", state.tip());
        let strains = compute_strains(&state, &p).unwrap();
        assert!(strains.sigma.iter().all(|s| s.norm() < 1e-12));
        assert!(strains.kappa.iter().all(|k| (k - k0).abs() < 1e-6));
    }
}
