//! Direct ensemble averages of the random oscillator.

use spectral_closure::oscillator::{exact_equal_time, exact_response, exact_two_time, monte_carlo_oracle, OscillatorParams};

fn main() -> spectral_closure::Result<()> {
    let params = OscillatorParams::new(0.1, 1.0, 1.0)?;
    let pairs = [(0.5, 0.25), (1.0, 0.5), (2.0, 1.0)];
    let points = monte_carlo_oracle(&params, 1_000_000, &pairs, 42)?;
    for p in points {
        println!("t = {}, t' = {}", p.t, p.t_prime);
        let rows = [
            ("Q(t,t')", p.two_time, exact_two_time(&params, p.t, p.t_prime)),
            ("Q(t,t) ", p.equal_time, exact_equal_time(&params, p.t)),
            ("G(t,t')", p.response, exact_response(&params, p.t, p.t_prime)),
        ];
        for (name, est, exact) in rows {
            println!(
                "  {name} {:.6} ± {:.1e} (exact {exact:.6}), imaginary part {:+.1e} ± {:.1e}",
                est.re, est.re_stderr, est.im, est.im_stderr
            );
        }
    }
    Ok(())
}
