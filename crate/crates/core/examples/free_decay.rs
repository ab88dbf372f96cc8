//! Free decay under all four closures on a modest grid.

use spectral_closure::diagnostics::{dissipation_rate, energy_spectrum, total_energy};
use spectral_closure::{ClosureKind, ClosureSettings, ClosureState, InitialSpectrum, TimeGrid, WavenumberGrid};

fn main() -> spectral_closure::Result<()> {
    let nu = 0.1;
    for kind in ClosureKind::ALL {
        let grid = WavenumberGrid::build(0.1, 6.0, 32, 16)?;
        let initial = InitialSpectrum::default().sample(&grid);
        let mut state = ClosureState::new(grid, TimeGrid::new(0.01, 60)?, ClosureSettings::new(kind, nu), &initial)?;
        let mut worst_residual: f64 = 0.0;
        for _ in 0..60 {
            worst_residual = worst_residual.max(state.advance()?.transfer_residual);
        }
        let report = |m: usize| {
            let e = energy_spectrum(state.grid(), state.q().diagonal(m));
            (total_energy(state.grid(), &e), dissipation_rate(state.grid(), nu, &e))
        };
        let ((e0, d0), (e1, d1)) = (report(0), report(60));
        println!(
            "{kind:>4}: E {e0:.5} -> {e1:.5}, dissipation {d0:.5} -> {d1:.5}, \
             transfer residual <= {worst_residual:.1e}, floored divisions {}",
            state.events().count()
        );
    }
    Ok(())
}
