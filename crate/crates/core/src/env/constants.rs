//! Physics constants of the classic control tasks.
//!
//! Values follow the widely used cart-pole and continuous mountain-car
//! definitions so that runs are reproducible without an external simulator.

pub mod cart_pole {
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    pub const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
    /// Half the pole length.
    pub const HALF_LENGTH: f64 = 0.5;
    pub const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
    /// Euler integration step (seconds).
    pub const TAU: f64 = 0.02;
    /// 12 degrees.
    pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
    pub const X_THRESHOLD: f64 = 2.4;
    pub const INIT_BOUND: f64 = 0.05;
    pub const HORIZON: usize = 500;
    /// Amplitude of the sine action transform.
    pub const FORCE_AMPLITUDE: f64 = 3.0;
    /// Upper end of the discretised action interval `[0, 4 pi]`.
    pub const ACTION_RANGE: f64 = 4.0 * std::f64::consts::PI;
}

pub mod mountain_car {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.45;
    pub const GOAL_VELOCITY: f64 = 0.0;
    pub const POWER: f64 = 0.0015;
    pub const GRAVITY: f64 = 0.0025;
    pub const INIT_LOW: f64 = -0.6;
    pub const INIT_HIGH: f64 = -0.4;
    pub const HORIZON: usize = 999;
    pub const GOAL_REWARD: f64 = 100.0;
    pub const FORCE_COST: f64 = 0.1;
}
