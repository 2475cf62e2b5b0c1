use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// One monomial `coeff * x^i * y^j * a^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub coeff: f64,
}

/// Polynomial in (x, y, a) stored as a coefficient table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    pub terms: Vec<Monomial>,
}

fn pw(v: f64, e: u32) -> f64 {
    v.powi(e as i32)
}

fn dpw(v: f64, e: u32) -> f64 {
    if e == 0 {
        0.0
    } else {
        e as f64 * v.powi(e as i32 - 1)
    }
}

impl Poly {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Poly { terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: f64, y: f64, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * pw(x, m.i) * pw(y, m.j) * pw(a, m.k))
            .sum()
    }

    pub fn dx(&self, x: f64, y: f64, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * dpw(x, m.i) * pw(y, m.j) * pw(a, m.k))
            .sum()
    }

    pub fn dy(&self, x: f64, y: f64, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * pw(x, m.i) * dpw(y, m.j) * pw(a, m.k))
            .sum()
    }

    pub fn da(&self, x: f64, y: f64, a: f64) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * pw(x, m.i) * pw(y, m.j) * dpw(a, m.k))
            .sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(|m| m.i + m.j + m.k).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |acc, m| acc.max(m.coeff.abs()))
    }
}

/// (x, y) -> (x^2 + a + y + A(x,y,a), b x + b B(x,y,a)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenonLikeFamily {
    pub b: f64,
    #[serde(default)]
    pub delta_bound: f64,
    #[serde(rename = "perturbA", default)]
    pub perturb_a: Poly,
    #[serde(rename = "perturbB", default)]
    pub perturb_b: Poly,
}

impl HenonLikeFamily {
    pub fn henon(b: f64) -> Self {
        HenonLikeFamily {
            b,
            delta_bound: 0.0,
            perturb_a: Poly::default(),
            perturb_b: Poly::default(),
        }
    }

    pub fn with_perturbation(b: f64, delta_bound: f64, a: Poly, bp: Poly) -> Result<Self> {
        let f = HenonLikeFamily {
            b,
            delta_bound,
            perturb_a: a,
            perturb_b: bp,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn is_pure(&self) -> bool {
        self.perturb_a.is_empty() && self.perturb_b.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.abs() < 1.0) {
            return Err(Error::InvalidFamily(format!("|b| = {} is not < 1", self.b.abs())));
        }
        for m in self.perturb_a.terms.iter().chain(&self.perturb_b.terms) {
            if !m.coeff.is_finite() {
                return Err(Error::InvalidFamily("non-finite coefficient".into()));
            }
            if m.coeff.abs() > self.delta_bound {
                return Err(Error::InvalidFamily(format!(
                    "coefficient {} exceeds delta_bound {}",
                    m.coeff, self.delta_bound
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, a: f64, p: Point) -> Point {
        let [x, y] = p;
        let mut u = x * x + a + y;
        let mut v = self.b * x;
        if !self.perturb_a.is_empty() {
            u += self.perturb_a.eval(x, y, a);
        }
        if !self.perturb_b.is_empty() {
            v += self.b * self.perturb_b.eval(x, y, a);
        }
        [u, v]
    }

    pub fn jacobian(&self, a: f64, p: Point) -> Matrix2<f64> {
        let [x, y] = p;
        let b = self.b;
        Matrix2::new(
            2.0 * x + self.perturb_a.dx(x, y, a),
            1.0 + self.perturb_a.dy(x, y, a),
            b + b * self.perturb_b.dx(x, y, a),
            b * self.perturb_b.dy(x, y, a),
        )
    }

    /// Derivative of `eval` with respect to the parameter.
    pub fn d_da(&self, a: f64, p: Point) -> Point {
        let [x, y] = p;
        [
            1.0 + self.perturb_a.da(x, y, a),
            self.b * self.perturb_b.da(x, y, a),
        ]
    }

    /// Preimage of `w`; closed form for the pure family, Newton otherwise.
    pub fn inverse(&self, a: f64, w: Point) -> Result<Point> {
        if self.b == 0.0 {
            return Err(Error::InverseSolveFailed { x: w[0], y: w[1] });
        }
        let x0 = w[1] / self.b;
        let guess = [x0, w[0] - x0 * x0 - a];
        if self.is_pure() {
            return Ok(guess);
        }
        let mut z = guess;
        for _ in 0..50 {
            let fz = self.eval(a, z);
            let r = nalgebra::Vector2::new(fz[0] - w[0], fz[1] - w[1]);
            let scale = 1.0 + w[0].abs() + w[1].abs() / self.b.abs();
            if r[0].abs() + r[1].abs() / self.b.abs() < 1e-14 * scale {
                return Ok(z);
            }
            let j = self.jacobian(a, z);
            let step = j
                .lu()
                .solve(&r)
                .ok_or(Error::InverseSolveFailed { x: w[0], y: w[1] })?;
            z = [z[0] - step[0], z[1] - step[1]];
        }
        let fz = self.eval(a, z);
        if (fz[0] - w[0]).abs() + (fz[1] - w[1]).abs() < 1e-10 {
            Ok(z)
        } else {
            Err(Error::InverseSolveFailed { x: w[0], y: w[1] })
        }
    }

    /// Bind the parameter, giving a planar map.
    pub fn at(&self, a: f64) -> HenonSlice<'_> {
        HenonSlice { family: self, a }
    }
}

/// A diffeomorphism of the plane (or an endomorphism when `inverse` fails).
pub trait PlanarMap: Sync {
    fn eval(&self, p: Point) -> Point;
    fn jacobian(&self, p: Point) -> Matrix2<f64>;
    fn inverse(&self, p: Point) -> Result<Point>;
}

#[derive(Debug, Clone, Copy)]
pub struct HenonSlice<'f> {
    pub family: &'f HenonLikeFamily,
    pub a: f64,
}

impl PlanarMap for HenonSlice<'_> {
    fn eval(&self, p: Point) -> Point {
        self.family.eval(self.a, p)
    }
    fn jacobian(&self, p: Point) -> Matrix2<f64> {
        self.family.jacobian(self.a, p)
    }
    fn inverse(&self, p: Point) -> Result<Point> {
        self.family.inverse(self.a, p)
    }
}

/// Diagonal linear map (x, y) -> (lx x, ly y); a test model with exact splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalMap {
    pub lx: f64,
    pub ly: f64,
}

impl PlanarMap for DiagonalMap {
    fn eval(&self, p: Point) -> Point {
        [self.lx * p[0], self.ly * p[1]]
    }
    fn jacobian(&self, _p: Point) -> Matrix2<f64> {
        Matrix2::new(self.lx, 0.0, 0.0, self.ly)
    }
    fn inverse(&self, p: Point) -> Result<Point> {
        if self.lx == 0.0 || self.ly == 0.0 {
            return Err(Error::InverseSolveFailed { x: p[0], y: p[1] });
        }
        Ok([p[0] / self.lx, p[1] / self.ly])
    }
}

/// Result of `iterate`: the visited points (not including the start) and
/// whether the orbit left the escape disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub points: Vec<Point>,
    pub escaped: bool,
}

pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

pub fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

pub fn iterate<M: PlanarMap + ?Sized>(map: &M, p: Point, n: usize, escape_radius: f64) -> Orbit {
    let mut points = Vec::with_capacity(n);
    let mut z = p;
    for _ in 0..n {
        z = map.eval(z);
        points.push(z);
        if !(norm(z) <= escape_radius) {
            return Orbit {
                points,
                escaped: true,
            };
        }
    }
    Orbit {
        points,
        escaped: false,
    }
}

impl HenonLikeFamily {
    pub fn iterate(&self, a: f64, p: Point, n: usize, escape_radius: f64) -> Orbit {
        iterate(&self.at(a), p, n, escape_radius)
    }
}
