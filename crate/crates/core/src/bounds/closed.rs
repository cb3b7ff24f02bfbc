//! Closed forms for two servers, used to cross-check the symbolic path.

pub mod k2 {
    use crate::dist::{JobSizeDistribution, SizeLaw};
    use crate::scalar::Scalar;

    /// `λE[v_1(S)] / (2 + 2λE[u_1(S)])` with `u_1`, `v_1` written out:
    /// `(E[S] - (1 - S̃(2λ))/(2λ)) / (3 - S̃(2λ))`.
    pub fn excess<T: Scalar, L: SizeLaw<T>>(law: &L, lambda: T) -> T {
        let two = T::lit(2.0);
        let t = law.expect_exp(two * lambda);
        (law.expect_power(1) - (T::one() - t) / (two * lambda)) / (T::lit(3.0) - t)
    }

    pub fn isq_total_work<T: Scalar>(dist: &JobSizeDistribution<T>, lambda: T) -> T {
        let rho = lambda * dist.mean();
        lambda * dist.expect_power(2) / (T::lit(2.0) * (T::one() - rho)) + excess(dist, lambda)
    }

    /// `2(1 - ρ) / (3 - S̃(2λ))`.
    pub fn idle_probability<T: Scalar>(dist: &JobSizeDistribution<T>, lambda: T) -> T {
        let two = T::lit(2.0);
        two * (T::one() - lambda * dist.mean()) / (T::lit(3.0) - dist.transform(two * lambda))
    }

    /// `C_2(x)`: equal to the excess of the truncated system.
    pub fn c2<T: Scalar>(dist: &JobSizeDistribution<T>, lambda: T, x: T) -> T {
        let view = dist.truncate(x);
        match view.law() {
            Ok(law) => excess(&law, view.lambda_x(lambda)),
            Err(_) => T::zero(),
        }
    }

    pub fn sep_isq<T: Scalar>(dist: &JobSizeDistribution<T>, lambda: T, x: T) -> T {
        let view = dist.truncate(x);
        let tail = lambda * dist.survival(x) * x * x;
        let Ok(law) = view.law() else {
            return tail;
        };
        let lam_x = view.lambda_x(lambda);
        let rho_x = view.rho_x(lambda);
        lam_x * law.expect_power(2) / (T::lit(2.0) * (T::one() - rho_x)) + excess(&law, lam_x) + tail
    }

    /// Rec-ISQ-L with `J_x = x^2`.
    pub fn rec_isq<T: Scalar>(dist: &JobSizeDistribution<T>, lambda: T, x: T) -> T {
        let view = dist.truncate(x);
        let Ok(law) = view.law() else {
            return sep_isq(dist, lambda, x);
        };
        let one = T::one();
        let two = T::lit(2.0);
        let lam_x = view.lambda_x(lambda);
        let rho_x = view.rho_x(lambda);
        let rho_xbar = view.rho_xbar(lambda);
        lam_x * law.expect_power(2) / (two * (one - rho_x))
            + excess(&law, lam_x) * (one - rho_xbar) / (one - rho_x)
            + (lambda - lam_x) * x * x / (two * (one - rho_x))
    }
}
