use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the three coordinates of R^3, in the fixed order `(t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coord {
    T,
    X,
    Y,
}

impl Coord {
    pub const ALL: [Coord; 3] = [Coord::T, Coord::X, Coord::Y];

    pub fn index(self) -> usize {
        match self {
            Coord::T => 0,
            Coord::X => 1,
            Coord::Y => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Coord> {
        Coord::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Coord::T => "t",
            Coord::X => "x",
            Coord::Y => "y",
        }
    }

    pub fn from_name(name: &str) -> Option<Coord> {
        match name {
            "t" => Some(Coord::T),
            "x" => Some(Coord::X),
            "y" => Some(Coord::Y),
            _ => None,
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point of R^3 with coordinates `(t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { t: 0.0, x: 0.0, y: 0.0 };

    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Point { t, x, y }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.t, self.x, self.y]
    }

    pub fn get(&self, c: Coord) -> f64 {
        self.coords()[c.index()]
    }

    pub fn with(mut self, c: Coord, value: f64) -> Self {
        match c {
            Coord::T => self.t = value,
            Coord::X => self.x = value,
            Coord::Y => self.y = value,
        }
        self
    }
}

impl From<[f64; 3]> for Point {
    fn from(c: [f64; 3]) -> Self {
        Point::new(c[0], c[1], c[2])
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, x={}, y={})", self.t, self.x, self.y)
    }
}
