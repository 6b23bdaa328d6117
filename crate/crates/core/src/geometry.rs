//! Planar points, trajectories and trajectory samples.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates by the given cosine/sine pair about `pivot`.
    pub fn rotate_about(self, pivot: Point, cos: f64, sin: f64) -> Point {
        let d = self - pivot;
        Point::new(pivot.x + cos * d.x - sin * d.y, pivot.y + sin * d.x + cos * d.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    fn div(self, rhs: f64) -> Point {
        Point::new(self.x / rhs, self.y / rhs)
    }
}

/// An ordered sequence of planar points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory(Vec<Point>);

/// Observed part of a sample (the predictor input).
pub type PastTrajectory = Trajectory;
/// Future part of a sample (the label, or a prediction of it).
pub type FutureTrajectory = Trajectory;

impl Trajectory {
    pub fn new(points: Vec<Point>) -> Self {
        Self(points)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![Point::ORIGIN; len])
    }

    pub fn from_xy(coords: &[(f64, f64)]) -> Self {
        Self(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn points_mut(&mut self) -> &mut [Point] {
        &mut self.0
    }

    pub fn into_points(self) -> Vec<Point> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<Point> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Point> {
        self.0.last().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.is_finite())
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Trajectory {
        Trajectory(self.0.iter().map(|&p| f(p)).collect())
    }

    /// Squared Euclidean norm of the flattened coordinate difference.
    pub fn flat_distance_sq(&self, other: &Trajectory) -> Result<f64> {
        self.check_same_len(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (*a - *b).norm_sq())
            .sum())
    }

    pub(crate) fn check_same_len(&self, other: &Trajectory) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "trajectory lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    /// Pointwise average of equally long trajectories.
    pub fn mean_of(trajectories: &[Trajectory]) -> Result<Trajectory> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::invalid("cannot average an empty set of trajectories"))?;
        let mut acc = vec![Point::ORIGIN; first.len()];
        for t in trajectories {
            first.check_same_len(t)?;
            for (a, p) in acc.iter_mut().zip(&t.0) {
                *a = *a + *p;
            }
        }
        let w = trajectories.len() as f64;
        Ok(Trajectory(acc.into_iter().map(|p| p / w).collect()))
    }
}

impl FromIterator<Point> for Trajectory {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        Trajectory(iter.into_iter().collect())
    }
}

impl std::ops::Index<usize> for Trajectory {
    type Output = Point;
    fn index(&self, i: usize) -> &Point {
        &self.0[i]
    }
}

/// One observed/future pair extracted from a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub past: PastTrajectory,
    pub future: FutureTrajectory,
    pub agent_id: i64,
    pub origin_frame: i64,
}

impl TrajectorySample {
    pub fn new(past: PastTrajectory, future: FutureTrajectory) -> Self {
        Self {
            past,
            future,
            agent_id: 0,
            origin_frame: 0,
        }
    }

    /// Checks nonempty past and finite coordinates.
    pub fn validate(&self) -> Result<()> {
        if self.past.is_empty() {
            return Err(Error::invalid("sample has an empty past trajectory"));
        }
        if !self.past.is_finite() || !self.future.is_finite() {
            return Err(Error::invalid(format!(
                "sample (agent {}, frame {}) has non-finite coordinates",
                self.agent_id, self.origin_frame
            )));
        }
        Ok(())
    }
}
