//! Analytic initial profiles on the unit interval.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tails of a Gaussian bump at the edge ends must fall below this fraction of
/// its amplitude.
pub const GAUSSIAN_TAIL: f64 = 1e-14;

/// A real function on `[0, 1]` with closed-form derivatives and an
/// antiderivative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Zero,
    /// `amplitude * exp(-((x - center) / width)^2)`, negligible at both ends.
    Gaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// `amplitude * sin(mode * pi * x)`.
    Sine { mode: u32, amplitude: f64 },
    /// Coefficients in ascending powers of `x`.
    Polynomial { coefficients: Vec<f64> },
    /// `Re(scale * (a e^{rate x} + b e^{-rate x}))`; real part of an
    /// eigenfunction component.
    EigenReal {
        a: Complex64,
        b: Complex64,
        rate: Complex64,
        scale: Complex64,
    },
    Scaled { factor: f64, profile: Box<Profile> },
    Sum { terms: Vec<Profile> },
}

impl Profile {
    pub fn scaled(self, factor: f64) -> Profile {
        Profile::Scaled {
            factor,
            profile: Box::new(self),
        }
    }

    pub fn plus(self, other: Profile) -> Profile {
        Profile::Sum {
            terms: vec![self, other],
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x, 1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval(x, 2)
    }

    /// Some fixed antiderivative (the constant is unspecified).
    pub fn antiderivative(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => 0.5 * amplitude * width * PI.sqrt() * libm::erf((x - center) / width),
            Profile::Sine { mode, amplitude } => {
                if *mode == 0 {
                    0.0
                } else {
                    let k = *mode as f64 * PI;
                    -amplitude * (k * x).cos() / k
                }
            }
            Profile::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (p, &c)| acc * x + c / (p as f64 + 1.0))
                * x,
            Profile::EigenReal { a, b, rate, scale } => {
                if rate.norm() == 0.0 {
                    (scale * (a + b)).re * x
                } else {
                    let ep = (rate * x).exp();
                    let em = (-rate * x).exp();
                    (scale / rate * (a * ep - b * em)).re
                }
            }
            Profile::Scaled { factor, profile } => factor * profile.antiderivative(x),
            Profile::Sum { terms } => terms.iter().map(|t| t.antiderivative(x)).sum(),
        }
    }

    fn eval(&self, x: f64, order: u32) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let z = (x - center) / width;
                let g = amplitude * (-z * z).exp();
                match order {
                    0 => g,
                    1 => -2.0 * z / width * g,
                    _ => (4.0 * z * z - 2.0) / (width * width) * g,
                }
            }
            Profile::Sine { mode, amplitude } => {
                let k = *mode as f64 * PI;
                match order {
                    0 => amplitude * (k * x).sin(),
                    1 => amplitude * k * (k * x).cos(),
                    _ => -amplitude * k * k * (k * x).sin(),
                }
            }
            Profile::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for (p, &c) in coefficients.iter().enumerate().rev() {
                    if (p as u32) < order {
                        break;
                    }
                    let falling: f64 = (0..order).map(|q| (p as u32 - q) as f64).product();
                    acc = acc * x + c * falling;
                }
                acc
            }
            Profile::EigenReal { a, b, rate, scale } => {
                let ep = (rate * x).exp();
                let em = (-rate * x).exp();
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                (scale * rate.powu(order) * (a * ep + sign * b * em)).re
            }
            Profile::Scaled { factor, profile } => factor * profile.eval(x, order),
            Profile::Sum { terms } => terms.iter().map(|t| t.eval(x, order)).sum(),
        }
    }

    /// Parameter checks; returns a reason on failure.
    pub fn check(&self) -> Result<(), String> {
        match self {
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if !(*width > 0.0) || !center.is_finite() || !amplitude.is_finite() {
                    return Err(format!("gaussian needs finite center/amplitude and width > 0, got center={center} width={width}"));
                }
                if !(0.0..=1.0).contains(center) {
                    return Err(format!("gaussian center {center} lies outside the edge"));
                }
                let reach = center.min(1.0 - center) / width;
                if (-reach * reach).exp() > GAUSSIAN_TAIL {
                    return Err(format!(
                        "gaussian bump (center={center}, width={width}) is not supported strictly inside the edge"
                    ));
                }
                Ok(())
            }
            Profile::Polynomial { coefficients } if coefficients.iter().any(|c| !c.is_finite()) => {
                Err("polynomial coefficients must be finite".into())
            }
            Profile::Scaled { profile, .. } => profile.check(),
            Profile::Sum { terms } => terms.iter().try_for_each(Profile::check),
            _ => Ok(()),
        }
    }
}

/// Initial displacement and velocity on one edge.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeInit {
    #[serde(default)]
    pub displacement: Profile,
    #[serde(default)]
    pub velocity: Profile,
}

impl EdgeInit {
    pub fn displacement(profile: Profile) -> Self {
        EdgeInit {
            displacement: profile,
            velocity: Profile::Zero,
        }
    }
}

/// Initial data for a whole network; entry `i - 1` belongs to edge `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub edges: Vec<EdgeInit>,
}

impl InitialData {
    pub fn zero(edge_count: usize) -> Self {
        InitialData {
            edges: vec![EdgeInit::default(); edge_count],
        }
    }

    pub fn with_edge(mut self, edge: usize, init: EdgeInit) -> Self {
        self.edges[edge - 1] = init;
        self
    }

    pub fn edge(&self, edge: usize) -> &EdgeInit {
        &self.edges[edge - 1]
    }

    /// `a * self + b * other`, edge by edge.
    pub fn combine(&self, a: f64, other: &InitialData, b: f64) -> InitialData {
        InitialData {
            edges: self
                .edges
                .iter()
                .zip(&other.edges)
                .map(|(x, y)| EdgeInit {
                    displacement: x
                        .displacement
                        .clone()
                        .scaled(a)
                        .plus(y.displacement.clone().scaled(b)),
                    velocity: x.velocity.clone().scaled(a).plus(y.velocity.clone().scaled(b)),
                })
                .collect(),
        }
    }
}
