//! wasm-bindgen front end for the static page in `www/`.
//!
//! Each export has a plain Rust twin so the numbers can be tested natively.

use fockflow::scan::{expectation_curve, gaussian, max_excitation};
use fockflow::{models, Channel, FieldSpec, Operator, TimeGrid};
use wasm_bindgen::prelude::*;

const MAX_PHOTONS: u32 = 20;

#[wasm_bindgen]
pub struct Series {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[wasm_bindgen]
impl Series {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }
}

#[wasm_bindgen]
pub struct Scattering {
    pub transmitted: f64,
    pub reflected: f64,
    pub peak_excitation: f64,
}

fn check(photons: u32, bandwidth: f64) -> Result<(), String> {
    if photons == 0 || photons > MAX_PHOTONS {
        return Err(format!("photon number must be between 1 and {MAX_PHOTONS}"));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err("bandwidth must be positive".into());
    }
    Ok(())
}

fn pe() -> Operator {
    Operator::ket_bra(2, models::EXCITED, models::EXCITED)
}

/// P_e(t) of a two-level atom (γ = 1) driven by N photons in a Gaussian pulse.
pub fn excitation(photons: u32, bandwidth: f64, samples: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    check(photons, bandwidth)?;
    let env = gaussian(bandwidth).map_err(|e| e.to_string())?;
    let (t0, t1) = env.support();
    let grid = TimeGrid::sampled(t0, t1 + 4.0, samples.clamp(2, 5000)).with_tolerances(1e-7, 1e-9);
    let c = expectation_curve(
        &models::two_level(1.0, 0.0).unwrap(),
        &FieldSpec::fock(env, photons),
        &models::basis_state(2, models::GROUND),
        &pe(),
        &[],
        &grid,
    )
    .map_err(|e| e.to_string())?;
    Ok((c.times, c.values))
}

/// One photon on an atom coupled equally to two waveguide directions.
pub fn two_mode(bandwidth: f64) -> Result<(f64, f64, f64), String> {
    check(1, bandwidth)?;
    let env = gaussian(bandwidth).map_err(|e| e.to_string())?;
    let (t0, t1) = env.support();
    let model = models::two_mode_two_level(0.5, 0.5).unwrap();
    let chans = [Channel::Flux { i: 0, j: 0 }, Channel::Flux { i: 1, j: 1 }];
    let grid = TimeGrid::sampled(t0, t1 + 40.0, 401).with_tolerances(1e-7, 1e-9);
    let c = expectation_curve(&model, &FieldSpec::fock(env, 1), &models::basis_state(2, models::GROUND), &pe(), &chans, &grid)
        .map_err(|e| e.to_string())?;
    let peak = c.values.iter().copied().fold(0.0, f64::max);
    Ok((*c.channels[0].last().unwrap(), *c.channels[1].last().unwrap(), peak))
}

/// max_t P_e on a log-spaced bandwidth grid.
pub fn peak_scan(photons: u32, lo: f64, hi: f64, points: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    check(photons, lo)?;
    if !(hi > lo) {
        return Err("scan needs lo < hi".into());
    }
    let points = points.clamp(2, 200);
    let mut bws = Vec::with_capacity(points);
    let mut peaks = Vec::with_capacity(points);
    for k in 0..points {
        let bw = lo * (hi / lo).powf(k as f64 / (points - 1) as f64);
        let env = gaussian(bw).map_err(|e| e.to_string())?;
        peaks.push(max_excitation(&env, photons, 1e-7).map_err(|e| e.to_string())?.value);
        bws.push(bw);
    }
    Ok((bws, peaks))
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = excitationCurve)]
pub fn excitation_curve_js(photons: u32, bandwidth: f64, samples: usize) -> Result<Series, JsError> {
    let (x, y) = excitation(photons, bandwidth, samples).map_err(js)?;
    Ok(Series { x, y })
}

#[wasm_bindgen(js_name = twoModeScattering)]
pub fn two_mode_js(bandwidth: f64) -> Result<Scattering, JsError> {
    let (transmitted, reflected, peak_excitation) = two_mode(bandwidth).map_err(js)?;
    Ok(Scattering { transmitted, reflected, peak_excitation })
}

#[wasm_bindgen(js_name = peakScan)]
pub fn peak_scan_js(photons: u32, lo: f64, hi: f64, points: usize) -> Result<Series, JsError> {
    let (x, y) = peak_scan(photons, lo, hi, points).map_err(js)?;
    Ok(Series { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_photon_peak() {
        let (_, pe) = excitation(1, 1.46, 801).unwrap();
        let m = pe.iter().copied().fold(0.0, f64::max);
        assert!((m - 0.801).abs() < 2e-3, "{m}");
    }

    #[test]
    fn scattering_conserves_the_photon() {
        for bw in [0.1, 1.0, 50.0] {
            let (t, r, _) = two_mode(bw).unwrap();
            assert!((t + r - 1.0).abs() < 1e-3, "{bw}: {t} {r}");
        }
        let (_, r, _) = two_mode(0.1).unwrap();
        assert!(r > 0.9);
    }

    #[test]
    fn scan_peaks_near_the_optimum() {
        let (bw, p) = peak_scan(1, 0.5, 5.0, 9).unwrap();
        let k = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert!((0.9..2.5).contains(&bw[k]), "{}", bw[k]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(excitation(0, 1.0, 10).is_err());
        assert!(excitation(1, -1.0, 10).is_err());
        assert!(peak_scan(1, 2.0, 1.0, 5).is_err());
    }
}
