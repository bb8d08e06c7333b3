//! Classic cart-pole balancing with explicit Euler integration.

use rand::Rng;
use thiserror::Error;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const MAX_STEPS: u32 = 500;

#[derive(Debug, Error, PartialEq)]
#[error("cart-pole state is terminal")]
pub struct TerminalState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: u32,
}

impl CartPoleState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
            steps: 0,
        }
    }

    /// Uniform in `[-0.05, 0.05]` on every coordinate.
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut u = || rng.gen_range(-0.05..=0.05);
        Self::new(u(), u(), u(), u())
    }

    pub fn observation(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_terminal(&self) -> bool {
        self.x.abs() > X_LIMIT || self.theta.abs() > THETA_LIMIT || self.steps >= MAX_STEPS
    }

    /// One Euler step with force `direction * FORCE_MAG`.
    pub fn step(&self, direction: f64) -> Result<Self, TerminalState> {
        if self.is_terminal() {
            return Err(TerminalState);
        }
        let force = direction.signum() * FORCE_MAG;
        let total_mass = CART_MASS + POLE_MASS;
        let polemass_length = POLE_MASS * HALF_LENGTH;
        let (sin, cos) = self.theta.sin_cos();
        let temp = (force + polemass_length * self.theta_dot * self.theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        Ok(Self {
            x: self.x + TAU * self.x_dot,
            x_dot: self.x_dot + TAU * x_acc,
            theta: self.theta + TAU * self.theta_dot,
            theta_dot: self.theta_dot + TAU * theta_acc,
            steps: self.steps + 1,
        })
    }

    /// The state reflected through the upright centre position.
    pub fn mirrored(&self) -> Self {
        Self {
            x: -self.x,
            x_dot: -self.x_dot,
            theta: -self.theta,
            theta_dot: -self.theta_dot,
            steps: self.steps,
        }
    }
}

/// Runs one episode; returns the number of steps survived.
pub fn run_episode(
    start: CartPoleState,
    mut policy: impl FnMut(&[f64; 4]) -> Result<f64, crate::inference::InferenceError>,
) -> Result<u32, crate::inference::InferenceError> {
    let mut s = start;
    while !s.is_terminal() {
        let out = policy(&s.observation())?;
        s = s.step(action(out)).expect("checked non-terminal");
    }
    Ok(s.steps)
}

/// `+1` when the network output is positive, else `-1`.
pub fn action(output: f64) -> f64 {
    if output > 0.0 {
        1.0
    } else {
        -1.0
    }
}
