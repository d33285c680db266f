//! Power-preserving interconnection of a plant and an internal-model controller.

use crate::controllers::ControllerRealization;
use crate::error::{Error, Result};
use crate::lti::StateSpaceSystem;
use crate::numerics::{
    c64, identity, max_hermitian_part_eig, min_singular_value, norm2, solve_linear, zeros, CMatrix, Factorization,
    ShiftedResolvent,
};

/// `ẋ_e = A_e x_e + B_e w_ext`, `e = C_e x_e + D_e w_ext` with `w_ext = (w_dist, y_ref)`.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    pub a_e: CMatrix,
    pub b_e: CMatrix,
    pub c_e: CMatrix,
    pub d_e: CMatrix,
    pub q1: CMatrix,
    pub q2: CMatrix,
    pub plant: StateSpaceSystem,
    pub controller: ControllerRealization,
}

impl ClosedLoopSystem {
    pub fn n(&self) -> usize {
        self.a_e.nrows()
    }

    pub fn n_plant(&self) -> usize {
        self.plant.n()
    }

    pub fn is_real(&self) -> bool {
        [&self.a_e, &self.b_e, &self.c_e, &self.d_e].iter().all(|m| crate::numerics::is_real(m))
    }
}

/// Interconnects `u = y_c`, `u_c = e = y_ref - y`.
pub fn assemble(plant: &StateSpaceSystem, ctrl: &ControllerRealization) -> Result<ClosedLoopSystem> {
    let p = plant.p();
    if ctrl.p() != p {
        return Err(Error::DimensionMismatch(format!("controller acts on {} outputs, plant has {}", ctrl.p(), p)));
    }
    let d = plant.d();
    let d_c = ctrl.d_c();
    let q1 = Factorization::new(&(identity(p) + d * &d_c))
        .and_then(|f| f.solve(&identity(p)))
        .map_err(|_| Error::FeedthroughLoopSingular)?;
    let q2 = Factorization::new(&(identity(p) + &d_c * d))
        .and_then(|f| f.solve(&identity(p)))
        .map_err(|_| Error::FeedthroughLoopSingular)?;
    let (a, b, c, b_d) = (plant.a(), plant.b(), plant.c(), plant.b_d());
    let (a_c, b_c, c_c) = (&ctrl.a_c, &ctrl.b_c, &ctrl.c_c);
    let n = plant.n();
    let nc = ctrl.n_c();
    let md = plant.m_d();

    let mut a_e = zeros(n + nc, n + nc);
    a_e.view_mut((0, 0), (n, n)).copy_from(&(a - b * &d_c * &q1 * c));
    a_e.view_mut((0, n), (n, nc)).copy_from(&(b * &q2 * c_c));
    a_e.view_mut((n, 0), (nc, n)).copy_from(&(-(b_c * &q1 * c)));
    a_e.view_mut((n, n), (nc, nc)).copy_from(&(a_c - b_c * &q1 * d * c_c));

    let mut b_e = zeros(n + nc, md + p);
    b_e.view_mut((0, 0), (n, md)).copy_from(b_d);
    b_e.view_mut((0, md), (n, p)).copy_from(&(b * &d_c * &q1));
    b_e.view_mut((n, md), (nc, p)).copy_from(&(b_c * &q1));

    let mut c_e = zeros(p, n + nc);
    c_e.view_mut((0, 0), (p, n)).copy_from(&(-(&q1 * c)));
    c_e.view_mut((0, n), (p, nc)).copy_from(&(-(&q1 * d * c_c)));

    let mut d_e = zeros(p, md + p);
    d_e.view_mut((0, md), (p, p)).copy_from(&q1);

    Ok(ClosedLoopSystem { a_e, b_e, c_e, d_e, q1, q2, plant: plant.clone(), controller: ctrl.clone() })
}

/// Largest eigenvalue of `(A_e + A_e*)/2`; nonpositive for a contraction semigroup.
pub fn check_contraction(cl: &ClosedLoopSystem) -> f64 {
    max_hermitian_part_eig(&cl.a_e)
}

/// `S_A(iω) = iω - A_c + B_c P(iω)(I + D_c P(iω))^{-1} C_c` and its inverse by two routes.
#[derive(Debug, Clone)]
pub struct SchurComplement {
    pub s: CMatrix,
    pub inv_direct: CMatrix,
    /// Woodbury form; `None` when `iω` is an eigenvalue of `A_c`.
    pub inv_woodbury: Option<CMatrix>,
}

pub fn schur_complement(plant: &StateSpaceSystem, ctrl: &ControllerRealization, omega: f64) -> Result<SchurComplement> {
    let iw = c64(0.0, omega);
    let nc = ctrl.n_c();
    let d_c = ctrl.d_c();
    // P(I + D_c P)^{-1} is the transfer of the plant under static feedback D_c.
    let p_cl = plant.output_feedback(&d_c)?.transfer(iw)?;
    let s = identity(nc) * iw - &ctrl.a_c + &ctrl.b_c * &p_cl * &ctrl.c_c;
    let inv_direct = solve_linear(&s, &identity(nc)).map_err(|_| Error::SpectrumHit(format!("{iw}")))?;
    let shifted = identity(nc) * iw - &ctrl.a_c;
    let inv_woodbury = match Factorization::new(&shifted).and_then(|f| f.solve(&identity(nc))) {
        Ok(r_c) => {
            let p = ctrl.p();
            let g = &ctrl.c_c * &r_c * &ctrl.b_c;
            let inner = identity(p) + &g * &p_cl;
            let x = solve_linear(&inner, &(&ctrl.c_c * &r_c)).map_err(|_| Error::InnerSingular)?;
            Some(&r_c - &r_c * &ctrl.b_c * &p_cl * x)
        }
        Err(_) => None,
    };
    Ok(SchurComplement { s, inv_direct, inv_woodbury })
}

/// `R(iω, A_e)` assembled from the Schur complement (block formula).
pub fn block_resolvent(plant: &StateSpaceSystem, ctrl: &ControllerRealization, omega: f64) -> Result<CMatrix> {
    let iw = c64(0.0, omega);
    let d_c = ctrl.d_c();
    let fb = plant.output_feedback(&d_c)?;
    let n = plant.n();
    let nc = ctrl.n_c();
    let r = fb.resolvent_apply(iw, &identity(n))?;
    let s_inv = schur_complement(plant, ctrl, omega)?.inv_direct;
    let bcl_cc = fb.b() * &ctrl.c_c;
    let bc_ccl = &ctrl.b_c * fb.c();
    let mut out = zeros(n + nc, n + nc);
    let top_right = &r * &bcl_cc * &s_inv;
    out.view_mut((0, 0), (n, n)).copy_from(&(&r - &top_right * &bc_ccl * &r));
    out.view_mut((0, n), (n, nc)).copy_from(&top_right);
    out.view_mut((n, 0), (nc, n)).copy_from(&(-(&s_inv * &bc_ccl * &r)));
    out.view_mut((n, n), (nc, nc)).copy_from(&s_inv);
    Ok(out)
}

/// `‖R(iω, A_e)‖ = 1/σ_min(iω - A_e)`; infinite on the spectrum.
pub fn resolvent_norm(cl: &ClosedLoopSystem, omega: f64) -> Result<f64> {
    let m = identity(cl.n()) * c64(0.0, omega) - &cl.a_e;
    let s = min_singular_value(&m)?;
    let floor = 1e-12 * norm2(&cl.a_e).max(1.0);
    Ok(if s <= floor { f64::INFINITY } else { 1.0 / s })
}

/// Reusable evaluator of `‖R(iω, A_e)‖` for frequency sweeps.
pub fn resolvent_evaluator(cl: &ClosedLoopSystem) -> Result<ShiftedResolvent> {
    ShiftedResolvent::new(&cl.a_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::build_fin_dim;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c64(x, 0.0))
    }

    #[test]
    fn integrator_loop_with_static_plant() {
        // P = 1 (A = -1 with zero coupling), integrator controller, D_c = 0.
        let plant = StateSpaceSystem::new(scalar(-1.0), scalar(0.0), scalar(0.0), scalar(1.0)).unwrap();
        let ctrl = build_fin_dim(&[0.0], 1, &[scalar(1.0)], scalar(0.0), scalar(0.0)).unwrap();
        let cl = assemble(&plant, &ctrl).unwrap();
        assert!((cl.a_e[(1, 1)] - c64(-1.0, 0.0)).norm() < 1e-15);
        assert!(check_contraction(&cl) <= 1e-12);
    }

    #[test]
    fn singular_feedthrough_loop() {
        let plant = StateSpaceSystem::new(scalar(-1.0), scalar(1.0), scalar(1.0), scalar(1.0)).unwrap();
        let ctrl = build_fin_dim(&[0.0], 1, &[scalar(1.0)], scalar(-1.0), scalar(0.0)).unwrap();
        assert_eq!(assemble(&plant, &ctrl).unwrap_err(), Error::FeedthroughLoopSingular);
    }
}
