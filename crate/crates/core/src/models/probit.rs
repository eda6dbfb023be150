//! Numerically stable pieces of the standard normal CDF.

use libm::erfc;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const TAIL: f64 = -30.0;

fn log_phi(x: f64) -> f64 {
    -0.5 * x * x - HALF_LN_2PI
}

/// `log(1 - 1/x^2 + 3/x^4 - 15/x^6)`, the Mills-ratio correction for x << 0.
fn tail_series(x: f64) -> f64 {
    let u = 1.0 / (x * x);
    (1.0 - u * (1.0 - 3.0 * u * (1.0 - 5.0 * u))).ln()
}

/// `log Phi(x)`.
pub fn log_ndtr(x: f64) -> f64 {
    if x > 5.0 {
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x > TAIL {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        log_phi(x) - (-x).ln() + tail_series(x)
    }
}

/// `phi(x) / Phi(x)`, the derivative of `log Phi` at `x`.
pub fn inverse_mills(x: f64) -> f64 {
    (log_phi(x) - log_ndtr(x)).exp()
}

/// `Phi(x)`.
pub fn ndtr(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((log_ndtr(0.0) - 0.5_f64.ln()).abs() < 1e-15);
        assert!((ndtr(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((log_ndtr(-10.0) - (-53.231_285_150_512_15)).abs() < 1e-10);
        assert!(log_ndtr(40.0) == 0.0 || log_ndtr(40.0).abs() < 1e-300);
    }

    #[test]
    fn tail_branches_join_smoothly() {
        let a = log_ndtr(TAIL + 1e-9);
        let b = log_ndtr(TAIL - 1e-9);
        assert!((a - b).abs() < 1e-6);
        assert!((inverse_mills(-30.0 + 1e-9) - inverse_mills(-30.0 - 1e-9)).abs() < 1e-6);
        // phi/Phi ~ -x far in the left tail
        assert!((inverse_mills(-200.0) / 200.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn derivative_consistency() {
        for x in [-35.0, -12.0, -3.0, -0.5, 0.0, 1.0, 4.0, 7.0] {
            let h = 1e-5;
            let fd = (log_ndtr(x + h) - log_ndtr(x - h)) / (2.0 * h);
            assert!((fd - inverse_mills(x)).abs() < 1e-6 * fd.abs().max(1.0), "{x}");
        }
    }
}
