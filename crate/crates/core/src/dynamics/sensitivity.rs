use nalgebra::SMatrix;

use super::{drift_derivative, drift_matrix, noise_vector, CycleMap, SystemParams};
use crate::error::{Error, Result};
use crate::linalg::{expm, DdVec3, Mat3, Vec3};

/// The cycle map together with its derivative in `omega_m` at fixed `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityMap {
    pub map: CycleMap,
    /// `dM(tau)/d omega_m`.
    pub dm: Mat3,
    /// `d v_inh / d omega_m`.
    pub dv_inh: Vec3,
}

impl SensitivityMap {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let map = CycleMap::new(params)?;
        let u = drift_matrix(params.omega_m, params.gamma_m, 0.0);
        let du = drift_derivative();
        // exp([[U, U'], [0, U]] tau) carries the Fréchet derivative in its
        // upper-right block
        let mut block = SMatrix::<f64, 6, 6>::zeros();
        block.fixed_view_mut::<3, 3>(0, 0).copy_from(&(u * params.tau));
        block.fixed_view_mut::<3, 3>(3, 3).copy_from(&(u * params.tau));
        block.fixed_view_mut::<3, 3>(0, 3).copy_from(&(du * params.tau));
        let e = expm(&block)?;
        let dm: Mat3 = e.fixed_view::<3, 3>(0, 3).into_owned();

        // U v_inh = (M - I) N  =>  U' v_inh + U dv_inh = M' N
        let dv_inh = if params.gamma_m == 0.0 {
            Vec3::zeros()
        } else {
            let n = noise_vector(params.n_th, params.gamma_m);
            u.lu()
                .solve(&(dm * n - du * map.free.v_inh))
                .ok_or_else(|| Error::numeric("singular drift matrix"))?
        };
        Ok(SensitivityMap { map, dm, dv_inh })
    }
}

/// Moments and their exact `omega_m` derivatives `(v_n, dv_n)` for
/// `n = 0..=n_max`, by differentiating the cycle recursion:
/// `dv_{n+1} = M' K v_n + M K dv_n + dv_inh`. The initial state is taken
/// independent of `omega_m`.
pub fn exact_sensitivities(params: &SystemParams, v0: &Vec3, n_max: usize) -> Result<Vec<(Vec3, Vec3)>> {
    let s = SensitivityMap::new(params)?;
    let dmk = s.dm * s.map.kick;
    let mut v = DdVec3::new(*v0);
    let mut dv = DdVec3::new(Vec3::zeros());
    let mut out = Vec::with_capacity(n_max + 1);
    out.push((*v0, Vec3::zeros()));
    for n in 1..=n_max {
        let forcing = dmk * v.value() + s.dv_inh;
        dv = dv.affine(&s.map.a, &forcing);
        v = v.affine(&s.map.a, &s.map.free.v_inh);
        let (x, dx) = (v.value(), dv.value());
        if !x.iter().chain(dx.iter()).all(|a| a.is_finite()) {
            return Err(Error::numeric(format!("sensitivity overflow after {n} pulses")));
        }
        out.push((x, dx));
    }
    Ok(out)
}
