#![allow(clippy::needless_range_loop)]

use fcmg::experiments::{
    cmd_lambda_hist, cmd_table, write_lambda_csv, write_table_csv, ExperimentConfig,
};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.mesh.uniform_levels = 4;
    cfg.mesh.adaptive_levels = 2;
    cfg
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = small();
    let render = |cfg: &ExperimentConfig| {
        let mut out = Vec::new();
        write_table_csv(&mut out, &cfg.hash(), &cmd_table(cfg).unwrap()).unwrap();
        let hist = cmd_lambda_hist(cfg, 2).unwrap();
        write_lambda_csv(&mut out, &cfg.hash(), &hist).unwrap();
        out
    };
    assert_eq!(render(&cfg), render(&cfg));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = small();
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back.hash(), cfg.hash());
    assert!(ExperimentConfig::from_toml("[solver]\nunknown_key = 1\n").is_err());
    assert!(ExperimentConfig::from_toml("[solver]\nomega = 1.5\n")
        .and_then(|c| c.validate().map(|_| c))
        .is_err());
}

#[test]
fn table_rows_grow_with_refinement() {
    let rows = cmd_table(&small()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].n_dof < w[1].n_dof));
    assert!(rows.iter().all(|r| r.n_dirichlet_cut > 0));
}
