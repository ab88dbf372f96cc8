//! DIA on the random oscillator: right at short times, qualitatively wrong
//! later. Its response oscillates like J₁(2t)/t instead of decaying as a
//! Gaussian.

use spectral_closure::oscillator::{dia_solve, exact_response, OscillatorParams};
use spectral_closure::TimeGrid;

fn main() -> spectral_closure::Result<()> {
    let params = OscillatorParams::new(0.0, 1.0, 1.0)?;
    let times = TimeGrid::new(5e-3, 600)?;
    let sol = dia_solve(&params, &times)?;
    println!("    t    G_dia(t,0)   G_exact(t,0)");
    for m in (0..=600).step_by(60) {
        let t = times.t(m);
        println!("{t:5.2} {:12.5} {:12.5}", sol.response(m, 0), exact_response(&params, t, 0.0));
    }
    Ok(())
}
