use beamlab::config::Config;
use beamlab::metric::Event;
use beamlab::recon::{build_probe, recover_at_point};
use beamlab::scenario::Scenario;

fn scan_case(tau: f64, nx: usize, cfl: f64, tau_aux: f64, h0_aux: f64) {
    let text = format!(
        "metric.kind = minkowski\ndomain.t_max = 2.0\ngrid.nx = {nx}\ngrid.cfl = {cfl}\n\
        q.kind = bump\nq.amplitude = 1.0\nq.center = 1.0 0.5\nq.width = 0.5 0.28\n\
        probe.tau = {tau}\nprobe.tau_aux = {tau_aux}\nprobe.h0_aux_im = {h0_aux}\n\
        probe.eps = 1e-3\nprobe.delta_prime = 0.15\nsolver.kappa = 1.0\nseed = 11\n");
    let scn = match Scenario::from_config(&Config::parse(&text).unwrap()) {
        Ok(s) => s, Err(e) => { println!("tau={tau} nx={nx} cfl={cfl}: scenario error {e}"); return; }
    };
    let p0 = Event::new(1.0, &[0.5]);
    let bundle = match build_probe(&scn, &p0) {
        Ok(b) => b, Err(e) => { println!("tau={tau} nx={nx} cfl={cfl}: probe error {e}"); return; }
    };
    let rv1 = bundle.corrected1.correction_ratio;
    match recover_at_point(&scn, &p0, None, true) {
        Ok(rec) => {
            let disc = rec.identity.discrepancy.unwrap();
            let rel = (rec.q_hat - num_complex::Complex64::new(rec.q_true_value, 0.0)).norm()
                / rec.q_true_value.abs();
            println!("tau={tau:>4} nx={nx:>5} cfl={cfl} tau_aux={tau_aux:>3} h0a={h0_aux}: r/v={rv1:.3} closure={disc:.4} qrel={rel:.4} qhat={:.4}+{:.4}i", rec.q_hat.re, rec.q_hat.im);
        }
        Err(e) => println!("tau={tau} nx={nx} cfl={cfl}: recover error {e}"),
    }
}

#[test]
fn scan() {
    for (tau, nx, cfl, taux, h0a) in [
        (30.0, 1280, 0.9, 5.0, 0.1),
        (40.0, 1280, 0.9, 5.0, 0.1),
        (60.0, 1280, 0.9, 5.0, 0.1),
        (60.0, 1920, 0.9, 5.0, 0.1),
        (80.0, 1920, 0.9, 5.0, 0.1),
        (80.0, 2560, 0.9, 5.0, 0.1),
    ] {
        scan_case(tau, nx, cfl, taux, h0a);
    }
}
