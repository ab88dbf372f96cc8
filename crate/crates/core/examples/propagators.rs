//! LET and VLET propagators built from a decaying correlation, and the
//! decorrelation of the two-time correlation against the viscous and
//! sweeping references.

use spectral_closure::diagnostics::{decorrelation_curve, sweeping_factor, SweepingParams};
use spectral_closure::{ClosureKind, ClosureSettings, ClosureState, InitialSpectrum, TimeGrid, WavenumberGrid};

fn main() -> spectral_closure::Result<()> {
    let grid = WavenumberGrid::build(0.1, 6.0, 24, 12)?;
    let initial = InitialSpectrum::default().sample(&grid);
    let mut state = ClosureState::new(grid, TimeGrid::new(0.02, 40)?, ClosureSettings::new(ClosureKind::Let, 0.1), &initial)?;
    for _ in 0..40 {
        state.advance()?;
    }
    let k_index = 12;
    let k = state.grid().k(k_index);
    println!("k = {k:.3}");
    println!("  t'    H_LET(t,t')  H_VLET(t,t')   Q(t,t')/Q(t',t')  viscous   swept");
    let sweep = SweepingParams::new(1.0)?;
    let curve = decorrelation_curve(&state, k_index)?;
    for n in (0..=40).step_by(8) {
        let point = curve[n];
        let tau = state.time() - point.t_prime;
        println!(
            "{:5.2} {:12.6} {:12.6} {:16.6} {:9.6} {:9.6}",
            point.t_prime,
            state.let_propagator(k_index, 40, n)?,
            state.vlet_propagator(k_index, 40, n)?,
            point.ratio,
            point.viscous_reference,
            point.viscous_reference * sweeping_factor(sweep, k, tau)
        );
    }
    Ok(())
}
