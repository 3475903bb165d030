//! Browser bindings for the static demo page in `www/`.
//!
//! Every function takes the beam and weight-profile parameters directly and
//! returns a flat `Float64Array`; the page reshapes it.

use wasm_bindgen::prelude::*;

use beam_lqr::beam_sim::{
    evolve_coupled, project_initial, reconstruct, simulate_decoupled, InitialData, InputConvention,
    Projection,
};
use beam_lqr::kernel_assembly::{
    assemble_feedback_kernel, synthesize_profile, uniform_grid, SignConvention, WeightProfile,
};
use beam_lqr::modal_riccati::{BeamParams, ModalWeight, ModeSynthesis};

fn synthesis(
    alpha: f64,
    q: f64,
    r: f64,
    modes: u32,
) -> Result<(BeamParams, Vec<ModeSynthesis>), String> {
    let params = BeamParams::new(alpha, 1.0, 1.0).map_err(|e| e.to_string())?;
    let profile = WeightProfile {
        amplitude: q,
        decay: r,
        order: modes,
        mask: None,
        base: ModalWeight::identity(),
    };
    let sols = synthesize_profile(&profile, &params).map_err(|e| e.to_string())?;
    Ok((params, sols))
}

/// Rows of `[n, lambda_re, lambda_im, mu_plus_re, mu_plus_im, mu_minus_re, mu_minus_im]`.
pub fn spectrum_rows(alpha: f64, q: f64, r: f64, modes: u32) -> Result<Vec<f64>, String> {
    let (_, sols) = synthesis(alpha, q, r, modes)?;
    Ok(sols
        .iter()
        .flat_map(|s| {
            let (l, m) = (s.open_loop.plus, s.closed_loop);
            [
                f64::from(s.n.get()),
                l.re,
                l.im,
                m.plus.re,
                m.plus.im,
                m.minus.re,
                m.minus.im,
            ]
        })
        .collect())
}

/// Rows of `[x, K1, K2]` on `points` uniform samples of `[0, 1]`.
pub fn gain_kernel_rows(
    alpha: f64,
    q: f64,
    r: f64,
    modes: u32,
    points: usize,
) -> Result<Vec<f64>, String> {
    let (_, sols) = synthesis(alpha, q, r, modes)?;
    let grid = uniform_grid(points);
    let gains: Vec<_> = sols.iter().map(|s| (s.n, s.gain)).collect();
    let k = assemble_feedback_kernel(&gains, &grid, SignConvention::Paper)
        .map_err(|e| e.to_string())?;
    Ok(grid
        .iter()
        .zip(&k)
        .flat_map(|(x, v)| [*x, v[0], v[1]])
        .collect())
}

/// `frames` displacement snapshots on `points` samples, starting from the
/// parabola and running to `horizon`. Frame-major.
pub fn field_frames(
    alpha: f64,
    q: f64,
    r: f64,
    modes: u32,
    coupled: bool,
    horizon: f64,
    frames: usize,
    points: usize,
) -> Result<Vec<f64>, String> {
    let (params, sols) = synthesis(alpha, q, r, modes)?;
    let gains: Vec<_> = sols.iter().map(|s| s.gain).collect();
    let init = project_initial(&InitialData::Parabola, modes, &Projection::default())
        .map_err(|e| e.to_string())?;
    let steps = frames.max(2) - 1;
    let dt = horizon / steps as f64;
    let traj = if coupled {
        evolve_coupled(
            &init,
            &gains,
            &params,
            InputConvention::PaperBeta,
            SignConvention::Paper,
            dt,
            horizon,
        )
    } else {
        simulate_decoupled(&init, &gains, &params, dt, horizon)
    }
    .map_err(|e| e.to_string())?;
    let grid = uniform_grid(points);
    Ok(traj
        .samples
        .iter()
        .flat_map(|s| reconstruct(&s.state, &grid).into_iter().map(|(d, _)| d))
        .collect())
}

#[wasm_bindgen]
pub fn spectrum(alpha: f64, q: f64, r: f64, modes: u32) -> Result<Vec<f64>, JsError> {
    spectrum_rows(alpha, q, r, modes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn gain_kernel(
    alpha: f64,
    q: f64,
    r: f64,
    modes: u32,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    gain_kernel_rows(alpha, q, r, modes, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn field(
    alpha: f64,
    q: f64,
    r: f64,
    modes: u32,
    coupled: bool,
    horizon: f64,
    frames: usize,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    field_frames(alpha, q, r, modes, coupled, horizon, frames, points).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(spectrum_rows(0.0, 1.0, 9.0, 5).unwrap().len(), 35);
        assert_eq!(gain_kernel_rows(0.0, 1.0, 9.0, 5, 11).unwrap().len(), 33);
        let f = field_frames(0.0, 1.0, 9.0, 4, true, 1.0, 6, 9).unwrap();
        assert_eq!(f.len(), 6 * 9);
        // the parabola peaks at 1/4 in the middle
        assert!((f[4] - 0.25).abs() < 1e-2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(spectrum_rows(-1.0, 1.0, 9.0, 5).is_err());
        assert!(gain_kernel_rows(0.0, 1.0, -2.0, 5, 11).is_err());
    }
}
