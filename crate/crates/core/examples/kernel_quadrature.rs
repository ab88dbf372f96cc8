//! The wavenumber grid, its quadrature rules and the triad kernel.

use spectral_closure::kernel::{eval_l, triad_side, WavenumberGrid, TRANSFER_SIGN};

fn main() -> spectral_closure::Result<()> {
    let grid = WavenumberGrid::build(0.1, 6.0, 32, 16)?;
    println!("{} radial nodes on [{}, {}], {} angular nodes", grid.n_k(), grid.k_min(), grid.k_max(), grid.n_mu());

    // radial rule on ∫ p² e^{−p} dp over the band
    let f = |p: f64| p * p * (-p).exp();
    let sum: f64 = grid.k_nodes().iter().zip(grid.k_weights()).map(|(&p, &w)| w * f(p)).sum();
    let antiderivative = |p: f64| -(p * p + 2.0 * p + 2.0) * (-p).exp();
    let exact = antiderivative(grid.k_max()) - antiderivative(grid.k_min());
    println!("radial rule: {sum:.12} vs {exact:.12} (rel err {:.1e})", (sum - exact).abs() / exact);

    let w: f64 = grid.mu_weights().iter().sum();
    println!("angular weights sum to {w}");

    println!("\n   k      p      mu        L     L+L(p<->q)");
    for &(k, p, mu) in &[(1.0, 1.0, 0.0), (1.0, 2.0, 0.3), (2.0, 0.5, -0.7), (0.3, 4.0, 0.95)] {
        let l = eval_l(k, p, mu)?;
        // the same triad seen from the third side
        let q = triad_side(k, p, mu);
        let y = (k - p * mu) / q;
        let sym = l + eval_l(k, q, y)?;
        println!("{k:6.2} {p:6.2} {mu:6.2} {l:9.4} {sym:11.4}");
    }
    println!("\nclosures integrate {TRANSFER_SIGN} * L, so the input term is never negative");
    Ok(())
}
