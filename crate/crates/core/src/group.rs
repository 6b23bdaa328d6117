//! Planar rotation groups, their Haar samples, and the actions on
//! trajectories.
//!
//! A [`Group`] is a [`GroupSpec`] with its element list materialized once.
//! Every consumer (equivariantized predictors, symmetrized scores, orbit
//! construction) reads the same cached list, so finite Monte-Carlo
//! approximations of SO(2) are shared exactly between paired computations.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FutureTrajectory, PastTrajectory, Point, Trajectory};

/// Reduces an angle into `[0, 2π)`.
pub fn reduce_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A planar rotation, stored by its angle in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    angle: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { angle: 0.0 };

    pub fn new(angle: f64) -> Self {
        Self {
            angle: reduce_angle(angle),
        }
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    pub fn compose(self, other: GroupElement) -> GroupElement {
        GroupElement::new(self.angle + other.angle)
    }

    pub fn inverse(self) -> GroupElement {
        GroupElement::new(-self.angle)
    }

    /// The 2x2 rotation matrix `[[c, -s], [s, c]]` as `(c, s)`.
    pub fn cos_sin(self) -> (f64, f64) {
        if self.angle == 0.0 {
            (1.0, 0.0)
        } else {
            (self.angle.cos(), self.angle.sin())
        }
    }

    pub fn rotate_about(self, p: Point, pivot: Point) -> Point {
        let (c, s) = self.cos_sin();
        p.rotate_about(pivot, c, s)
    }
}

/// Which point rotations act about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionConvention {
    Origin,
    /// Rotate about the final observed position of the input trajectory.
    #[default]
    LastObserved,
}

impl ActionConvention {
    /// Pivot for an input trajectory. Fails on an empty trajectory.
    pub fn pivot_for(self, past: &PastTrajectory) -> Result<Point> {
        let last = past
            .last()
            .ok_or_else(|| Error::invalid("empty input trajectory"))?;
        Ok(match self {
            ActionConvention::Origin => Point::ORIGIN,
            ActionConvention::LastObserved => last,
        })
    }
}

impl FromStr for ActionConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "origin" => Ok(ActionConvention::Origin),
            "last-observed" | "last_observed" => Ok(ActionConvention::LastObserved),
            other => Err(Error::invalid(format!("unknown pivot convention `{other}`"))),
        }
    }
}

impl fmt::Display for ActionConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionConvention::Origin => f.write_str("origin"),
            ActionConvention::LastObserved => f.write_str("last-observed"),
        }
    }
}

/// Input action φ_g: rotates every point of `x` about the pivot.
pub fn apply_input_action(
    g: GroupElement,
    x: &PastTrajectory,
    conv: ActionConvention,
) -> Result<PastTrajectory> {
    let pivot = conv.pivot_for(x)?;
    Ok(rotate_trajectory(g, x, pivot))
}

/// Output action ψ_g. Under `LastObserved` the anchor must be the pivot of the
/// paired input.
pub fn apply_output_action(
    g: GroupElement,
    y: &FutureTrajectory,
    conv: ActionConvention,
    anchor: Option<Point>,
) -> Result<FutureTrajectory> {
    let pivot = match conv {
        ActionConvention::Origin => Point::ORIGIN,
        ActionConvention::LastObserved => anchor.ok_or_else(|| {
            Error::invalid("output action under last-observed pivot needs an anchor")
        })?,
    };
    Ok(rotate_trajectory(g, y, pivot))
}

pub(crate) fn rotate_trajectory(g: GroupElement, t: &Trajectory, pivot: Point) -> Trajectory {
    if g.angle == 0.0 {
        return t.clone();
    }
    let (c, s) = g.cos_sin();
    t.map(|p| p.rotate_about(pivot, c, s))
}

/// How the rotation group is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupSpec {
    /// The cyclic group C_n of rotations by 2πj/n.
    Cyclic(u32),
    /// SO(2) approximated by K i.i.d. uniform angles from a seeded generator.
    So2MonteCarlo { samples: u32, seed: u64 },
}

impl GroupSpec {
    pub fn is_finite_group(self) -> bool {
        matches!(self, GroupSpec::Cyclic(_))
    }

    pub fn len(self) -> usize {
        match self {
            GroupSpec::Cyclic(n) => n as usize,
            GroupSpec::So2MonteCarlo { samples, .. } => samples as usize,
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Cyclic(n) => write!(f, "c{n}"),
            GroupSpec::So2MonteCarlo { samples, seed } => write!(f, "so2:K={samples}:seed={seed}"),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    /// Parses `c<n>` or `so2:K=<int>:seed=<int>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("malformed group spec `{s}`"));
        if let Some(n) = s.strip_prefix('c').or_else(|| s.strip_prefix('C')) {
            let n: u32 = n.parse().map_err(|_| bad())?;
            return Ok(GroupSpec::Cyclic(n));
        }
        let rest = s
            .strip_prefix("so2")
            .or_else(|| s.strip_prefix("SO2"))
            .ok_or_else(bad)?;
        let mut samples = None;
        let mut seed = 0u64;
        for part in rest.split(':').filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            match key.trim() {
                "K" | "k" => samples = Some(value.trim().parse().map_err(|_| bad())?),
                "seed" => seed = value.trim().parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        Ok(GroupSpec::So2MonteCarlo {
            samples: samples.ok_or_else(bad)?,
            seed,
        })
    }
}

/// Lists the group elements (Cyclic) or draws the Haar sample (SO(2)).
/// Each element carries weight `1 / len`.
pub fn enumerate_or_sample(spec: GroupSpec) -> Result<Vec<GroupElement>> {
    match spec {
        GroupSpec::Cyclic(0) => Err(Error::invalid("cyclic group order must be positive")),
        GroupSpec::Cyclic(n) => Ok((0..n)
            .map(|j| GroupElement::new(TAU * j as f64 / n as f64))
            .collect()),
        GroupSpec::So2MonteCarlo { samples: 0, .. } => {
            Err(Error::invalid("SO(2) Monte-Carlo sample count must be positive"))
        }
        GroupSpec::So2MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..samples)
                .map(|_| GroupElement::new(rng.random_range(0.0..TAU)))
                .collect())
        }
    }
}

/// A group spec with its elements materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    spec: GroupSpec,
    elements: Vec<GroupElement>,
}

impl Group {
    pub fn new(spec: GroupSpec) -> Result<Self> {
        Ok(Self {
            spec,
            elements: enumerate_or_sample(spec)?,
        })
    }

    pub fn cyclic(n: u32) -> Result<Self> {
        Self::new(GroupSpec::Cyclic(n))
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Uniform Haar weight of every element.
    pub fn weight(&self) -> f64 {
        1.0 / self.elements.len() as f64
    }
}

/// The orbit `[(φ_g x, ψ_g y)]` over every element of the group.
pub fn orbit(
    group: &Group,
    x: &PastTrajectory,
    y: &FutureTrajectory,
    conv: ActionConvention,
) -> Result<Vec<(PastTrajectory, FutureTrajectory)>> {
    let anchor = conv.pivot_for(x)?;
    group
        .elements()
        .iter()
        .map(|&g| {
            Ok((
                apply_input_action(g, x, conv)?,
                apply_output_action(g, y, conv, Some(anchor))?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const TOL: f64 = 1e-9;

    fn close(a: Point, b: Point) -> bool {
        (a - b).norm() <= TOL
    }

    fn close_traj(a: &Trajectory, b: &Trajectory) -> bool {
        a.len() == b.len() && a.points().iter().zip(b.points()).all(|(p, q)| close(*p, *q))
    }

    #[test]
    fn quarter_turn_about_origin() {
        let x = Trajectory::from_xy(&[(1.0, 0.0)]);
        let r = apply_input_action(GroupElement::new(FRAC_PI_2), &x, ActionConvention::Origin).unwrap();
        assert!(close(r[0], Point::new(0.0, 1.0)));
    }

    #[test]
    fn identity_leaves_input_unchanged() {
        let x = Trajectory::from_xy(&[(1.5, -2.0), (3.0, 4.0)]);
        for conv in [ActionConvention::Origin, ActionConvention::LastObserved] {
            assert_eq!(apply_input_action(GroupElement::IDENTITY, &x, conv).unwrap(), x);
        }
    }

    #[test]
    fn two_quarter_turns_make_a_half_turn() {
        let x = Trajectory::from_xy(&[(1.0, 0.0)]);
        let g = GroupElement::new(FRAC_PI_2);
        let twice = apply_input_action(g, &apply_input_action(g, &x, ActionConvention::Origin).unwrap(), ActionConvention::Origin).unwrap();
        let once = apply_input_action(GroupElement::new(PI), &x, ActionConvention::Origin).unwrap();
        assert!(close(twice[0], Point::new(-1.0, 0.0)));
        assert!(close_traj(&twice, &once));
    }

    #[test]
    fn empty_input_is_rejected() {
        let err = apply_input_action(GroupElement::IDENTITY, &Trajectory::default(), ActionConvention::Origin);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn output_half_turn() {
        let y = Trajectory::from_xy(&[(1.0, 0.0), (2.0, 0.0)]);
        let r = apply_output_action(GroupElement::new(PI), &y, ActionConvention::Origin, None).unwrap();
        assert!(close_traj(&r, &Trajectory::from_xy(&[(-1.0, 0.0), (-2.0, 0.0)])));
        let id = apply_output_action(GroupElement::IDENTITY, &y, ActionConvention::Origin, None).unwrap();
        assert_eq!(id, y);
    }

    #[test]
    fn output_action_needs_anchor_under_last_observed() {
        let y = Trajectory::from_xy(&[(1.0, 0.0)]);
        let err = apply_output_action(GroupElement::new(1.0), &y, ActionConvention::LastObserved, None);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn last_observed_pivot_is_fixed() {
        let x = Trajectory::from_xy(&[(0.0, 0.0), (1.0, 2.0), (3.0, 5.0)]);
        let r = apply_input_action(GroupElement::new(2.3), &x, ActionConvention::LastObserved).unwrap();
        assert!(close(r.last().unwrap(), x.last().unwrap()));
    }

    #[test]
    fn cyclic_enumeration() {
        let c4 = enumerate_or_sample(GroupSpec::Cyclic(4)).unwrap();
        let angles: Vec<f64> = c4.iter().map(|g| g.angle()).collect();
        for (a, e) in angles.iter().zip([0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(enumerate_or_sample(GroupSpec::Cyclic(1)).unwrap(), vec![GroupElement::IDENTITY]);
    }

    #[test]
    fn zero_sized_groups_are_rejected() {
        assert!(enumerate_or_sample(GroupSpec::Cyclic(0)).is_err());
        assert!(enumerate_or_sample(GroupSpec::So2MonteCarlo { samples: 0, seed: 1 }).is_err());
    }

    #[test]
    fn so2_sample_has_zero_circular_mean() {
        let els = enumerate_or_sample(GroupSpec::So2MonteCarlo { samples: 10_000, seed: 42 }).unwrap();
        let (c, s) = els.iter().fold((0.0, 0.0), |(c, s), g| (c + g.angle().cos(), s + g.angle().sin()));
        let n = els.len() as f64;
        assert!((c / n).abs() < 0.05 && (s / n).abs() < 0.05);
        assert!(els.iter().all(|g| (0.0..TAU).contains(&g.angle())));
    }

    #[test]
    fn so2_sampling_is_deterministic() {
        let spec = GroupSpec::So2MonteCarlo { samples: 64, seed: 9 };
        let a = enumerate_or_sample(spec).unwrap();
        let b = enumerate_or_sample(spec).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.angle().to_bits() == y.angle().to_bits()));
    }

    #[test]
    fn orbit_of_a_point_under_c4() {
        let g = Group::cyclic(4).unwrap();
        let x = Trajectory::from_xy(&[(1.0, 0.0)]);
        let orb = orbit(&g, &x, &Trajectory::default(), ActionConvention::Origin).unwrap();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        assert_eq!(orb.len(), 4);
        for ((px, _), (ex, ey)) in orb.iter().zip(expected) {
            assert!(close(px[0], Point::new(ex, ey)));
        }
        let c1 = orbit(&Group::cyclic(1).unwrap(), &x, &x, ActionConvention::Origin).unwrap();
        assert_eq!(c1, vec![(x.clone(), x)]);
    }

    #[test]
    fn orbit_of_orbit_elements_is_the_same_set() {
        let g = Group::cyclic(8).unwrap();
        let x = Trajectory::from_xy(&[(0.3, -1.2), (1.1, 0.4), (2.0, 1.0)]);
        let y = Trajectory::from_xy(&[(2.7, 1.9), (3.5, 2.6)]);
        for conv in [ActionConvention::Origin, ActionConvention::LastObserved] {
            let base = orbit(&g, &x, &y, conv).unwrap();
            for (ox, oy) in &base {
                let again = orbit(&g, ox, oy, conv).unwrap();
                for (ax, ay) in &again {
                    let found = base.iter().any(|(bx, by)| close_traj(ax, bx) && close_traj(ay, by));
                    assert!(found, "orbit not closed under {conv}");
                }
            }
        }
    }

    #[test]
    fn group_spec_round_trip() {
        for s in ["c4", "c8", "c1", "so2:K=64:seed=7"] {
            let spec: GroupSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("d4".parse::<GroupSpec>().is_err());
        assert!("so2:seed=3".parse::<GroupSpec>().is_err());
        assert!("cx".parse::<GroupSpec>().is_err());
    }

    #[test]
    fn cyclic_left_invariance_of_counting_measure() {
        for n in [3u32, 4, 8] {
            let els = enumerate_or_sample(GroupSpec::Cyclic(n)).unwrap();
            for &h in &els {
                let mut shifted: Vec<f64> = els
                    .iter()
                    .map(|&g| g.compose(h).angle())
                    .map(|a| if a > TAU - 1e-9 { 0.0 } else { a })
                    .collect();
                shifted.sort_by(f64::total_cmp);
                for (a, g) in shifted.iter().zip(&els) {
                    let d = (a - g.angle()).abs();
                    assert!(d < 1e-9 || (TAU - d) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn cyclic_inverses_are_in_the_set() {
        let els = enumerate_or_sample(GroupSpec::Cyclic(8)).unwrap();
        for g in &els {
            let inv = g.inverse();
            assert!(els.iter().any(|h| {
                let d = (h.angle() - inv.angle()).abs();
                d < 1e-12 || (TAU - d) < 1e-12
            }));
        }
    }
}
