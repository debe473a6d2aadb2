//! Shipped experiment configs, compiled into the binary.

pub struct Entry {
    pub name: &'static str,
    pub text: &'static str,
}

impl Entry {
    /// The `description` value from the config text.
    pub fn description(&self) -> &'static str {
        self.text
            .lines()
            .find_map(|l| {
                let rest = l.trim().strip_prefix("description")?.trim_start();
                let rest = rest.strip_prefix('=')?.trim();
                rest.strip_prefix('"')?.strip_suffix('"')
            })
            .unwrap_or("")
    }
}

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(Entry {
            name: $name,
            text: include_str!(concat!("../configs/", $name, ".toml")),
        }),*]
    };
}

static ENTRIES: &[Entry] = shipped![
    "fig1_prony_fit",
    "fig2_vacf_modes",
    "fig3_gle_c1_sensitivity",
    "fig3_gle_c1_sweep",
    "fig4_double_well_sweep",
    "fig5_gle_omega_sensitivity",
    "fig6_fig7_mode_count",
    "fig8_ou_sigma_timeavg",
    "fig9_langevin_beta_timeavg",
    "oracle_gle_equilibrium",
    "oracle_langevin_covariance",
    "oracle_ou_theta_timeavg",
];

pub fn entries() -> &'static [Entry] {
    ENTRIES
}

pub fn find(name: &str) -> Option<&'static Entry> {
    let name = name.strip_suffix(".toml").unwrap_or(name);
    ENTRIES.iter().find(|e| e.name == name)
}
