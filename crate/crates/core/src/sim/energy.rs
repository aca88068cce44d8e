//! Per-edge UAV energy model: wind-relative airspeed drives drag, drag
//! drives thrust and pitch, and an implicit momentum-theory equation gives
//! the induced velocity that closes the power computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the UAV platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// UAV mass, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    /// Air density, kg/m^3.
    pub air_density: f64,
    /// Reference (rotor disk / frontal) area, m^2.
    pub area: f64,
    /// Drag coefficient, unitless.
    pub drag_coeff: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams { mass: 2.0, gravity: 9.81, air_density: 1.225, area: 0.2, drag_coeff: 1.0 }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("air_density", self.air_density),
            ("area", self.area),
            ("drag_coeff", self.drag_coeff),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Direction of the edge `u -> v` in degrees, measured in a frame with
/// origin at `u`. For `x_v = 0` the two-branch arctangent is undefined and
/// the value is taken by continuity (90 or 270 degrees).
pub fn edge_direction(u: (f64, f64), v: (f64, f64)) -> Result<f64> {
    let x = v.0 - u.0;
    let y = v.1 - u.1;
    if x == 0.0 && y == 0.0 {
        return Err(Error::invalid("edge endpoints coincide; direction undefined"));
    }
    Ok(if x > 0.0 {
        (y / x).atan().to_degrees().rem_euclid(360.0)
    } else if x < 0.0 {
        180.0 + (y / x).atan().to_degrees()
    } else if y > 0.0 {
        90.0
    } else {
        270.0
    })
}

/// Relative wind direction `θ = ω_o - ψ`, normalized to `[0, 360)`.
pub fn relative_wind_direction(omega_o: f64, edge_dir: f64) -> f64 {
    (omega_o - edge_dir).rem_euclid(360.0)
}

/// Airspeed against ground speed `s_d`, wind speed `ω_s`, and relative
/// wind direction `θ`: components `s_N = s_d - ω_s·cos θ`,
/// `s_E = -ω_s·sin θ`.
pub fn airspeed(s_d: f64, omega_s: f64, theta_deg: f64) -> f64 {
    let theta = theta_deg.to_radians();
    let s_n = s_d - omega_s * theta.cos();
    let s_e = -omega_s * theta.sin();
    (s_n * s_n + s_e * s_e).sqrt()
}

/// Induced velocity for thrust `T`: the fixed point of
/// `s_i = s_h^2 / sqrt((s_d cos α)^2 + (s_d sin α + s_i)^2)` with
/// `s_h = sqrt(T / (2 ρ A))`, iterated from `s_i = s_h`.
pub fn induced_velocity(thrust: f64, s_d: f64, alpha_pitch: f64, rho: f64, area: f64) -> Result<f64> {
    if !(thrust > 0.0) {
        return Err(Error::invalid(format!("thrust must be positive, got {thrust}")));
    }
    let s_h = (thrust / (2.0 * rho * area)).sqrt();
    let horiz = s_d * alpha_pitch.cos();
    let vert = s_d * alpha_pitch.sin();
    let next = |s_i: f64| s_h * s_h / (horiz * horiz + (vert + s_i).powi(2)).sqrt();

    let mut s_i = s_h;
    for _ in 0..1000 {
        let s_new = next(s_i);
        let delta = (s_new - s_i).abs();
        s_i = s_new;
        if delta < 1e-10 {
            break;
        }
    }
    let residual = (s_i - next(s_i)).abs();
    if residual >= 1e-8 {
        return Err(Error::NonConvergence { context: "induced velocity fixed point", residual });
    }
    Ok(s_i)
}

/// Energy per unit distance `μ` (J/m) for a leg flown at ground speed
/// `s_d` under wind speed `ω_s` at relative direction `θ`:
/// drag `F_D = ½ρ s_a² C_D A`, thrust `T = Wg + F_D`, pitch
/// `α = arctan(F_D / Wg)`, power `P = T(s_d sin α + s_i)`, `μ = P / s_d`.
pub fn energy_per_distance(
    theta_deg: f64,
    omega_s: f64,
    s_d: f64,
    params: &EnergyParams,
) -> Result<f64> {
    if !(s_d > 0.0) {
        return Err(Error::invalid(format!("ground speed must be positive, got {s_d}")));
    }
    let s_a = airspeed(s_d, omega_s, theta_deg);
    let weight = params.mass * params.gravity;
    let drag = 0.5 * params.air_density * s_a * s_a * params.drag_coeff * params.area;
    let thrust = weight + drag;
    let alpha = (drag / weight).atan();
    let s_i = induced_velocity(thrust, s_d, alpha, params.air_density, params.area)?;
    let power = thrust * (s_d * alpha.sin() + s_i);
    Ok(power / s_d)
}

/// Total energy (J) to traverse the straight edge `u -> v` at ground speed
/// `s_d` under a sampled wind `(ω_s, ω_o)`: `E = μ · λ`.
pub fn edge_energy(
    u: (f64, f64),
    v: (f64, f64),
    omega_s: f64,
    omega_o: f64,
    s_d: f64,
    params: &EnergyParams,
) -> Result<f64> {
    let length = ((u.0 - v.0).powi(2) + (u.1 - v.1).powi(2)).sqrt();
    let psi = edge_direction(u, v)?;
    let theta = relative_wind_direction(omega_o, psi);
    Ok(energy_per_distance(theta, omega_s, s_d, params)? * length)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_direction_examples() {
        let o = (0.0, 0.0);
        assert_eq!(edge_direction(o, (1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(edge_direction(o, (-1.0, 0.0)).unwrap(), 180.0);
        assert!((edge_direction(o, (1.0, -1.0)).unwrap() - 315.0).abs() < 1e-12);
        assert!((edge_direction(o, (1.0, 1.0)).unwrap() - 45.0).abs() < 1e-12);
        assert!((edge_direction(o, (-1.0, 1.0)).unwrap() - 135.0).abs() < 1e-12);
        assert_eq!(edge_direction(o, (0.0, 2.0)).unwrap(), 90.0);
        assert_eq!(edge_direction(o, (0.0, -2.0)).unwrap(), 270.0);
        assert!(edge_direction(o, (0.0, 0.0)).is_err());
        // translation invariance
        assert_eq!(
            edge_direction((5.0, 3.0), (6.0, 3.0)).unwrap(),
            edge_direction(o, (1.0, 0.0)).unwrap()
        );
    }

    #[test]
    fn relative_direction_examples() {
        assert_eq!(relative_wind_direction(120.0, 120.0), 0.0);
        assert_eq!(relative_wind_direction(10.0, 350.0), 20.0);
        let t = relative_wind_direction(45.0, 100.0);
        let t_wrapped = relative_wind_direction(45.0 + 360.0, 100.0);
        assert!((t - t_wrapped).abs() < 1e-12);
    }

    #[test]
    fn airspeed_examples() {
        assert_eq!(airspeed(10.0, 0.0, 123.0), 10.0);
        assert!((airspeed(10.0, 3.0, 0.0) - 7.0).abs() < 1e-12);
        assert!((airspeed(10.0, 3.0, 180.0) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn induced_velocity_hover_is_exact() {
        let p = EnergyParams::default();
        let thrust = p.mass * p.gravity;
        let s_h = (thrust / (2.0 * p.air_density * p.area)).sqrt();
        let s_i = induced_velocity(thrust, 0.0, 0.3, p.air_density, p.area).unwrap();
        assert_eq!(s_i, s_h);
    }

    #[test]
    fn induced_velocity_residual_small_on_random_grid() {
        let p = EnergyParams::default();
        for ti in 1..8 {
            for si in 0..8 {
                for ai in 0..5 {
                    let thrust = 5.0 * ti as f64;
                    let s_d = 2.5 * si as f64;
                    let alpha = 0.25 * ai as f64;
                    let s_i = induced_velocity(thrust, s_d, alpha, p.air_density, p.area).unwrap();
                    let s_h = (thrust / (2.0 * p.air_density * p.area)).sqrt();
                    let rhs = s_h * s_h
                        / ((s_d * alpha.cos()).powi(2) + (s_d * alpha.sin() + s_i).powi(2)).sqrt();
                    assert!((s_i - rhs).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn induced_velocity_decreases_with_speed() {
        let p = EnergyParams::default();
        let thrust = 30.0;
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let s_d = k as f64;
            let s_i = induced_velocity(thrust, s_d, 0.0, p.air_density, p.area).unwrap();
            assert!(s_i < last + 1e-12, "s_d={s_d}: {s_i} !< {last}");
            last = s_i;
        }
    }

    #[test]
    fn energy_rate_is_symmetric_in_relative_direction() {
        let p = EnergyParams::default();
        for k in 0..=360 {
            let theta = k as f64;
            let a = energy_per_distance(theta, 4.0, 10.0, &p).unwrap();
            let b = energy_per_distance(-theta, 4.0, 10.0, &p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "theta={theta}");
        }
    }

    #[test]
    fn headwind_costs_at_least_tailwind() {
        let p = EnergyParams::default();
        for w in [0.0, 1.0, 3.0, 6.0, 9.0] {
            let head = energy_per_distance(180.0, w, 10.0, &p).unwrap();
            let tail = energy_per_distance(0.0, w, 10.0, &p).unwrap();
            assert!(head >= tail - 1e-12, "w={w} head={head} tail={tail}");
        }
    }

    #[test]
    fn calm_air_rate_matches_hand_composition() {
        // independent straight-line composition of the same formulas
        let p = EnergyParams::default();
        let s_d: f64 = 10.0;
        let s_a = s_d;
        let drag: f64 = 0.5 * 1.225 * s_a * s_a * 1.0 * 0.2;
        let weight: f64 = 2.0 * 9.81;
        let thrust = weight + drag;
        let alpha = (drag / weight).atan();
        // solve the induced-velocity equation by bisection, separately from
        // the production fixed-point loop
        let s_h = (thrust / (2.0 * 1.225 * 0.2)).sqrt();
        let g = |s: f64| {
            s * ((s_d * alpha.cos()).powi(2) + (s_d * alpha.sin() + s).powi(2)).sqrt() - s_h * s_h
        };
        let (mut lo, mut hi) = (0.0, s_h);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let s_i = 0.5 * (lo + hi);
        let mu_by_hand = thrust * (s_d * alpha.sin() + s_i) / s_d;
        let mu = energy_per_distance(77.0, 0.0, s_d, &p).unwrap();
        assert!((mu - mu_by_hand).abs() < 1e-9, "mu={mu} hand={mu_by_hand}");
        // calm air: independent of the wind direction entirely
        let mu2 = energy_per_distance(211.0, 0.0, s_d, &p).unwrap();
        assert_eq!(mu, mu2);
    }

    #[test]
    fn edge_energy_scales_linearly_with_length() {
        let p = EnergyParams::default();
        let e1 = edge_energy((0.0, 0.0), (100.0, 0.0), 3.0, 45.0, 10.0, &p).unwrap();
        let e2 = edge_energy((0.0, 0.0), (200.0, 0.0), 3.0, 45.0, 10.0, &p).unwrap();
        assert!(e1 > 0.0);
        assert!((e2 - 2.0 * e1).abs() < 1e-9 * e2);
    }
}
