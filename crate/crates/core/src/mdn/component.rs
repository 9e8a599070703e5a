use crate::special::StudentT;

const LN_2: f64 = std::f64::consts::LN_2;
/// Step of the central difference for `∂ ln T(w; m) / ∂m`.
const NU_STEP: f64 = 1e-4;

/// Log-density of one skewed-t component and its partial derivatives.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComponentGrad {
    pub ln_pdf: f64,
    pub d_mu: f64,
    pub d_sigma: f64,
    pub d_xi: f64,
    pub d_nu: f64,
}

/// `ln f(y; μ, σ, ξ, ν)` with its gradient. The derivative of
/// `ln T(w; ν+1)` with respect to the degrees of freedom of `T` is a central
/// difference; every other term is analytic.
pub fn component_ln_pdf_grad(y: f64, mu: f64, sigma: f64, xi: f64, nu: f64, want_nu: bool) -> ComponentGrad {
    let (t_nu, t_nu1) = match (StudentT::new(nu), StudentT::new(nu + 1.0)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return ComponentGrad { ln_pdf: f64::NAN, ..Default::default() },
    };
    let z = (y - mu) / sigma;
    let z2 = z * z;
    let q = nu + z2;
    let r = ((nu + 1.0) / q).sqrt();
    let w = xi * z * r;
    let ln_t = t_nu.ln_pdf(z);
    let ln_cap_t = t_nu1.ln_cdf(w);
    let ln_pdf = LN_2 + ln_t + ln_cap_t - sigma.ln();

    // λ = t(w; ν+1) / T(w; ν+1), the derivative of ln T in its argument.
    let lambda = (t_nu1.ln_pdf(w) - ln_cap_t).exp();
    let d_z = -(nu + 1.0) * z / q + lambda * xi * r * nu / q;
    let d_mu = -d_z / sigma;
    let d_sigma = -d_z * z / sigma - 1.0 / sigma;
    let d_xi = lambda * z * r;
    let d_nu = if want_nu {
        let dw_dnu = xi * z * 0.5 * r * (1.0 / (nu + 1.0) - 1.0 / q);
        let d_dof = match (StudentT::new(nu + 1.0 + NU_STEP), StudentT::new(nu + 1.0 - NU_STEP)) {
            (Ok(hi), Ok(lo)) => (hi.ln_cdf(w) - lo.ln_cdf(w)) / (2.0 * NU_STEP),
            _ => f64::NAN,
        };
        t_nu.d_ln_pdf_d_nu(z) + lambda * dw_dnu + d_dof
    } else {
        0.0
    };
    ComponentGrad { ln_pdf, d_mu, d_sigma, d_xi, d_nu }
}
