//! Compares the fast row assembly with the naive-loop oracle on a tiny grid.

use spectral_closure::closures::assembly::assemble_row;
use spectral_closure::verify::brute;
use spectral_closure::{ClosureKind, ClosureSettings, ClosureState, InitialSpectrum, TimeGrid, WavenumberGrid};

fn main() -> spectral_closure::Result<()> {
    for kind in ClosureKind::ALL {
        let grid = WavenumberGrid::build_small(0.5, 3.0, 4, 3)?;
        let initial = InitialSpectrum::default().sample(&grid);
        let mut settings = ClosureSettings::new(kind, 0.1);
        settings.track_response = true;
        let mut state = ClosureState::new(grid, TimeGrid::new(0.05, 4)?, settings, &initial)?;
        for _ in 0..4 {
            state.advance()?;
        }
        let rhs = assemble_row(&state, 4)?;
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            worst = worst.max(brute::equal_time(&state, k, 4).relative_gap(rhs.equal_time[k]));
            for n in 0..=4 {
                worst = worst.max(brute::two_time(&state, k, 4, n).relative_gap(rhs.correlation_at(k, n)));
            }
        }
        println!("{kind:>4}: largest gap {worst:.1e}");
    }
    Ok(())
}
