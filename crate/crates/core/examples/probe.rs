//! Dev probe: fee table at various grid settings.

use gmwb_core::contract::{ContractSpec, MarketParams, SurrenderPenalty};
use gmwb_core::engine::{GridConfig, GridSpec, StrategyKind};
use gmwb_core::feesolver::{fair_fee, FeeSolveConfig};

fn fee(per_year: u32, vol: f64, strategy: StrategyKind, cfg: &GridConfig) -> (f64, u32) {
    let contract =
        ContractSpec::new(100.0, 10.0, per_year, 0.10, SurrenderPenalty::ExcessOnly, 0.0).unwrap();
    let params = MarketParams::flat(0.05, vol, &contract).unwrap();
    let grid = GridSpec::build(&contract, &params, cfg).unwrap();
    let r = fair_fee(&contract, &params, &grid, strategy, &FeeSolveConfig::default()).unwrap();
    (r.fee_bp, r.iterations)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("table");

    let reference = [
        (1u32, 0.2, 129.1, 129.2, 123.9),
        (2u32, 0.2, 133.7, 134.0, 125.6),
        (1u32, 0.3, 293.5, 418.4, 392.9),
        (2u32, 0.3, 302.7, 456.5, 410.7),
    ];

    match mode {
        "table" => {
            let cfg = GridConfig::default();
            println!("freq vol | optimal (ref) | ows (ref) | bang (ref)");
            for &(py, vol, r_opt, r_ows, r_bb) in &reference {
                let t0 = std::time::Instant::now();
                let (opt, it1) = fee(py, vol, StrategyKind::Optimal, &cfg);
                let (ows, _) = fee(py, vol, StrategyKind::OptimalWithSurrender, &cfg);
                let (bb, _) = fee(py, vol, StrategyKind::BangBang, &cfg);
                println!(
                    "{py}/y {vol} | {opt:7.2} ({r_opt}) d={:+.2} | {ows:7.2} ({r_ows}) d={:+.2} | {bb:7.2} ({r_bb}) d={:+.2}  [{it1} evals, {:?}]",
                    opt - r_opt, ows - r_ows, bb - r_bb, t0.elapsed()
                );
            }
        }
        "wmax" => {
            // Sensitivity of one cell to w_max and M.
            let py: u32 = args[2].parse().unwrap();
            let vol: f64 = args[3].parse().unwrap();
            let strat = StrategyKind::Optimal;
            let contract =
                ContractSpec::new(100.0, 10.0, py, 0.10, SurrenderPenalty::ExcessOnly, 0.0)
                    .unwrap();
            let params = MarketParams::flat(0.05, vol, &contract).unwrap();
            let spec_wmax = GridSpec::default_w_max(&contract, &params);
            println!("spec w_max = {spec_wmax:.1}");
            for (label, wmax, m) in [
                ("spec     M=400", spec_wmax, 400usize),
                ("spec     M=800", spec_wmax, 800),
                ("spec     M=1600", spec_wmax, 1600),
                ("spec     M=3200", spec_wmax, 3200),
                ("2x spec  M=400", 2.0 * spec_wmax, 400),
                ("3sd      M=400", 100.0 * (0.5_f64 + 3.0 * vol * 10f64.sqrt()).exp(), 400),
                ("3sd      M=800", 100.0 * (0.5_f64 + 3.0 * vol * 10f64.sqrt()).exp(), 800),
                ("6sd      M=400", 100.0 * (0.5_f64 + 6.0 * vol * 10f64.sqrt()).exp(), 400),
                ("10x      M=400", 1000.0, 400),
                ("10x      M=800", 1000.0, 800),
                ("20x      M=400", 2000.0, 400),
                ("20x      M=800", 2000.0, 800),
            ] {
                let cfg = GridConfig {
                    num_intervals: m,
                    w_max: Some(wmax),
                    ..GridConfig::default()
                };
                let (f, _) = {
                    let grid = GridSpec::build(&contract, &params, &cfg).unwrap();
                    let r =
                        fair_fee(&contract, &params, &grid, strat, &FeeSolveConfig::default())
                            .unwrap();
                    (r.fee_bp, r.iterations)
                };
                println!("{label}: w_max={wmax:9.1} M={m:5} fee={f:9.3}");
            }
        }
        "lq" => {
            // A-grid refinement and quadrature-order sensitivity for one cell.
            let py: u32 = args[2].parse().unwrap();
            let vol: f64 = args[3].parse().unwrap();
            for (l, q, m) in [
                (2usize, 9usize, 800usize),
                (2, 13, 800),
                (2, 17, 800),
                (2, 21, 800),
                (2, 25, 800),
                (2, 33, 800),
                (2, 41, 800),
                (2, 49, 800),
                (2, 64, 800),
                (2, 64, 1600),
                (2, 49, 1600),
            ] {
                let cfg = GridConfig {
                    num_intervals: m,
                    refine: l,
                    quad_order: q,
                    w_max: Some(1000.0),
                };
                let (f, _) = fee(py, vol, StrategyKind::Optimal, &cfg);
                println!("L={l} q={q} M={m}: fee={f:9.3}");
            }
        }
        "mc" => {
            // DP static vs MC static at a fixed fee.
            use gmwb_core::engine::price;
            use gmwb_core::mc::{mc_price_static, McConfig};
            let py: u32 = args[2].parse().unwrap();
            let vol: f64 = args[3].parse().unwrap();
            let fee_bp: f64 = args[4].parse().unwrap();
            let contract =
                ContractSpec::new(100.0, 10.0, py, 0.10, SurrenderPenalty::ExcessOnly, fee_bp)
                    .unwrap();
            let params = MarketParams::flat(0.05, vol, &contract).unwrap();
            for (label, wmax, m, q) in [
                ("spec M=400 q9 ", GridSpec::default_w_max(&contract, &params), 400usize, 9usize),
                ("10x  M=400 q9 ", 1000.0, 400, 9),
                ("10x  M=800 q9 ", 1000.0, 800, 9),
                ("5x   M=400 q9 ", 500.0, 400, 9),
                ("10x  M=800 q17", 1000.0, 800, 17),
                ("10x  M=800 q33", 1000.0, 800, 33),
                ("10x  M=800 q64", 1000.0, 800, 64),
                ("10x  M=1600 q33", 1000.0, 1600, 33),
                ("20x  M=3200 q33", 2000.0, 3200, 33),
            ] {
                let cfg = GridConfig {
                    num_intervals: m,
                    quad_order: q,
                    w_max: Some(wmax),
                    ..GridConfig::default()
                };
                let grid = GridSpec::build(&contract, &params, &cfg).unwrap();
                let dp = price(&contract, &params, &grid, StrategyKind::Static).unwrap();
                println!("DP static {label}: {:.6}", dp.price);
            }
            for seed in [777u64, 778, 779] {
                let est = mc_price_static(
                    &contract,
                    &params,
                    &McConfig {
                        paths: 8_000_000,
                        seed,
                        antithetic: true,
                    },
                )
                .unwrap();
                println!("MC static seed {seed}: {:.6} +- {:.6}", est.estimate, est.std_error);
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
