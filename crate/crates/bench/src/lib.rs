//! Fixtures shared by the criterion benchmarks.

use panelhc::montecarlo::{generate_panel, Contamination, McConfig};
use panelhc::{fit_within, leverage, within_transform, DemeanedPanel, FeFit, LeverageSet};

/// A fitted simulated panel of `n` units and `t` periods.
pub struct Fixture {
    pub panel: DemeanedPanel,
    pub fit: FeFit,
    pub leverage: LeverageSet,
}

pub fn fixture(n: usize, t: usize, contaminated: bool) -> Fixture {
    let cfg = McConfig {
        n_units: n,
        n_periods: t,
        gamma: 2.0,
        contamination: Contamination {
            enabled: contaminated,
            ..Contamination::default()
        },
        ..McConfig::default()
    };
    let sim = generate_panel(&cfg, 0).expect("valid config");
    let panel = within_transform(&sim.panel);
    let fit = fit_within(&panel).expect("full rank");
    let leverage = leverage(&fit, &panel).expect("leverage");
    Fixture {
        panel,
        fit,
        leverage,
    }
}
