/// Linear predictors are clamped to `[-ETA_CLAMP, ETA_CLAMP]` before the link
/// is evaluated, so probabilities and odds stay finite and inside (0, 1).
pub const ETA_CLAMP: f64 = 30.0;

/// Logistic link `pi(v) = exp(v) / (1 + exp(v))`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LogisticLink;

impl LogisticLink {
    #[inline]
    pub fn clamp(v: f64) -> f64 {
        v.clamp(-ETA_CLAMP, ETA_CLAMP)
    }

    #[inline]
    pub fn prob(v: f64) -> f64 {
        let v = Self::clamp(v);
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    }

    /// `pi'(v) = pi(v) (1 - pi(v))`.
    #[inline]
    pub fn deriv(v: f64) -> f64 {
        let p = Self::prob(v);
        p * (1.0 - p)
    }

    /// Odds `pi / (1 - pi) = exp(v)`.
    #[inline]
    pub fn odds(v: f64) -> f64 {
        Self::clamp(v).exp()
    }

    /// `log(1 + exp(v))` without overflow.
    #[inline]
    pub fn softplus(v: f64) -> f64 {
        let v = Self::clamp(v);
        if v > 0.0 {
            v + (-v).exp().ln_1p()
        } else {
            v.exp().ln_1p()
        }
    }
}
