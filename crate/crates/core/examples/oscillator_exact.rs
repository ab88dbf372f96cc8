//! RGET on the random oscillator reproduces the closed-form statistics.

use spectral_closure::oscillator::{
    constraint_residual, exact_equal_time, exact_response, max_exact_error, rget_solve, OscillatorParams,
};
use spectral_closure::TimeGrid;

fn main() -> spectral_closure::Result<()> {
    let params = OscillatorParams::new(0.1, 1.0, 1.0)?;
    let times = TimeGrid::new(1e-3, 3000)?;
    let sol = rget_solve(&params, &times)?;

    println!("    t      Q(t,t)       exact        G(t,0)       exact");
    for m in (0..=3000).step_by(500) {
        let t = times.t(m);
        println!(
            "{t:5.2} {:12.6e} {:12.6e} {:12.6e} {:12.6e}",
            sol.equal_time(m),
            exact_equal_time(&params, t),
            sol.response(m, 0),
            exact_response(&params, t, 0.0)
        );
    }
    println!("max relative error over all entries: {:.2e}", max_exact_error(&params, &sol));
    println!("constraint residual (every 10th node): {:.2e}", constraint_residual(&params, &sol, 10));
    Ok(())
}
