//! Scratch probe for end-to-end tuning. Run with:
//! cargo test -p dol-core --test pipeline_probe -- --ignored --nocapture

use dol_core::datagen::{
    assemble_dataset, default_selection_plan, fit_weights, generate_contexts, rollout_raw_data,
    ContextRanges,
};
use dol_core::gradient::DecisionProblem;
use dol_core::greedy::run_deterministic_greedy;
use dol_core::predictor::{train_dol, train_two_stage, ContextVector, TrainConfig, TrainSample};
use dol_core::sim::{default_template, evaluate_selection, DefaultMapParams};
use dol_core::submodular::{RouteId, Selection};
use dol_core::{derive_seed, seeded_rng};
use rand::seq::SliceRandom;
use std::time::Instant;

#[derive(Clone, Copy)]
struct ProbeCfg {
    label: &'static str,
    grid: usize,
    n_routes: usize,
    removal: f64,
    n_partitions: usize,
    battery: f64,
    budget: usize,
    waypoints: usize,
    radius: (f64, f64),
    wind_a: (f64, f64),
    n_uavs: usize,
    n_g: usize,
    n_train_ctx: usize,
    repeats: usize,
    epochs: usize,
    xi: f64,
    eps: f64,
    lr: f64,
    trials: usize,
    batch: usize,
}

fn run(cfg: &ProbeCfg) {
    let t0 = Instant::now();
    let mut map = DefaultMapParams {
        grid_nx: cfg.grid,
        grid_ny: cfg.grid,
        n_routes: cfg.n_routes,
        removal_fraction: cfg.removal,
        n_partitions: cfg.n_partitions,
        step_budget: cfg.budget,
        n_ugvs: cfg.n_g,
        ..DefaultMapParams::default()
    };
    map.uav_defaults.battery_capacity = cfg.battery;
    map.uav_defaults.waypoint_count = cfg.waypoints;
    let template = default_template(&map).unwrap();

    let hi = (cfg.grid - 1) as f64 * 100.0 - 100.0;
    let ranges = ContextRanges {
        center_x: (100.0, hi),
        center_y: (100.0, hi),
        radius: cfg.radius,
        wind_a: cfg.wind_a,
        wind_b: (1.5, 3.0),
    };

    let contexts =
        generate_contexts(cfg.n_train_ctx, cfg.n_uavs, &ranges, &mut seeded_rng(100, 0)).unwrap();
    let plan =
        default_selection_plan(&template.ground, cfg.n_g, 25, 15, &mut seeded_rng(101, 0)).unwrap();
    let records: Vec<_> = contexts
        .iter()
        .enumerate()
        .map(|(i, ctx)| {
            rollout_raw_data(ctx, &plan, &template, cfg.repeats, derive_seed(102, i as u64)).unwrap()
        })
        .collect();

    let objective = template.objective();
    let (dataset, infos) = assemble_dataset(&records, &objective, cfg.xi, 103, 0.8).unwrap();
    let mean_iters: f64 =
        infos.iter().map(|i| i.iterations as f64).sum::<f64>() / infos.len() as f64;
    let mean_resid: f64 =
        dataset.train.iter().map(|s| s.fit_residual).sum::<f64>() / dataset.train.len() as f64;

    let system = template.system().unwrap();
    let problem = DecisionProblem::new(&objective, &system);
    let train_samples: Vec<TrainSample> = dataset
        .train
        .iter()
        .map(|s| TrainSample { z: s.z.clone(), w: s.w.clone() })
        .collect();

    let config = TrainConfig {
        batch_size: cfg.batch,
        learning_rate: cfg.lr,
        epochs: cfg.epochs,
        sg_trials: cfg.trials,
        epsilon: cfg.eps,
        seed: 1,
        hidden: 96,
        ..TrainConfig::default()
    };
    let (dol, dol_hist) = train_dol(&train_samples, &problem, &config).unwrap();
    let (two, _) = train_two_stage(&train_samples, &problem, &config).unwrap();

    let eval_contexts =
        generate_contexts(30, cfg.n_uavs, &ranges, &mut seeded_rng(200, 0)).unwrap();
    let ids: Vec<RouteId> = template.ground.route_ids().collect();
    let mut sums = [0.0f64; 5]; // dol, two, random, oracle, fitted
    let mut refit_dist = 0.0f64;
    let mut refit2_sum = 0.0f64;
    let eval_repeats = 5;
    for (ci, ctx) in eval_contexts.iter().enumerate() {
        let scenario = template.instantiate(&ctx.circles, &ctx.wind).unwrap();
        let outcomes: Vec<_> = (0..eval_repeats)
            .map(|r| scenario.roll_out(derive_seed(300, (ci * 100 + r) as u64)).unwrap())
            .collect();
        let mut zvec = Vec::new();
        for c in &ctx.circles {
            zvec.extend([c.center.0, c.center.1, c.radius]);
        }
        zvec.extend([ctx.wind.a, ctx.wind.b, ctx.wind.omega_o]);
        let z = ContextVector(zvec);
        let score = |sel: &Selection| -> f64 {
            let mut total = 0usize;
            for o in &outcomes {
                total += evaluate_selection(sel, o, &template.ground).unwrap();
            }
            total as f64 / eval_repeats as f64
        };
        sums[0] += score(
            &run_deterministic_greedy(&objective, &dol.predict(&z).unwrap(), &system).unwrap(),
        );
        sums[1] += score(
            &run_deterministic_greedy(&objective, &two.predict(&z).unwrap(), &system).unwrap(),
        );
        sums[2] += score(&{
            let mut pool = ids.clone();
            pool.shuffle(&mut seeded_rng(400, ci as u64));
            Selection::from_ids(pool[..cfg.n_g].iter().copied()).unwrap()
        });
        let mut best = 0.0f64;
        let m = ids.len();
        for a in 0..m {
            for b in (a + 1)..m {
                if cfg.n_g == 2 {
                    best = best.max(score(&Selection::from_ids([ids[a], ids[b]]).unwrap()));
                    continue;
                }
                for c in (b + 1)..m {
                    best =
                        best.max(score(&Selection::from_ids([ids[a], ids[b], ids[c]]).unwrap()));
                }
            }
        }
        sums[3] += best;
        let rec =
            rollout_raw_data(ctx, &plan, &template, cfg.repeats, derive_seed(500, ci as u64))
                .unwrap();
        let (s, _) = fit_weights(&rec, &objective, cfg.xi).unwrap();
        sums[4] += score(&run_deterministic_greedy(&objective, &s.w, &system).unwrap());
        let rec2 =
            rollout_raw_data(ctx, &plan, &template, cfg.repeats, derive_seed(600, ci as u64))
                .unwrap();
        let (s2, _) = fit_weights(&rec2, &objective, cfg.xi).unwrap();
        let d2: f64 = (s.w.as_array() - s2.w.as_array()).iter().map(|d| d * d).sum();
        let n2: f64 = s.w.as_array().iter().map(|v| v * v).sum();
        refit_dist += (d2.sqrt() / n2.sqrt().max(1e-12)) / eval_contexts.len() as f64;
        refit2_sum += score(&run_deterministic_greedy(&objective, &s2.w, &system).unwrap());
    }
    let n = eval_contexts.len() as f64;
    let losses = dol_hist.losses();
    println!(
        "{}: dol {:.2} two {:.2} rand {:.2} oracle {:.2} fitted {:.2} refit2 {:.2} | dol/rand {:.2} fitted/rand {:.2} | resid {:.2} iters {:.0} refit {:.2} | loss {:.2}->{:.2} | {:?}",
        cfg.label,
        sums[0] / n,
        sums[1] / n,
        sums[2] / n,
        sums[3] / n,
        sums[4] / n,
        refit2_sum / n,
        sums[0] / sums[2],
        sums[4] / sums[2],
        mean_resid,
        mean_iters,
        refit_dist,
        losses[0],
        losses[losses.len() - 1],
        t0.elapsed()
    );
}

#[test]
#[ignore]
fn probe() {
    let base = ProbeCfg {
        label: "base12x16p",
        grid: 12,
        n_routes: 15,
        removal: 0.85,
        n_partitions: 16,
        battery: 7.0e4,
        budget: 50,
        waypoints: 8,
        radius: (50.0, 110.0),
        wind_a: (1.0, 6.0),
        n_uavs: 6,
        n_g: 3,
        n_train_ctx: 200,
        repeats: 6,
        epochs: 50,
        xi: 1e-4,
        eps: 0.2,
        lr: 1e-2,
        trials: 12,
        batch: 20,
    };
    let b = ProbeCfg {
        n_partitions: 25,
        waypoints: 4,
        repeats: 20,
        n_train_ctx: 300,
        epochs: 80,
        removal: 0.8,
        radius: (40.0, 90.0),
        wind_a: (0.5, 2.5),
        ..base
    };
    let c = ProbeCfg {
        removal: 0.85,
        eps: 1.2,
        lr: 3e-3,
        trials: 16,
        epochs: 150,
        batch: 10,
        repeats: 30,
        n_train_ctx: 350,
        ..b
    };
    run(&ProbeCfg { label: "r24-rem90", n_routes: 24, removal: 0.9, ..c });
    run(&ProbeCfg { label: "r30-rem90", n_routes: 30, removal: 0.9, ..c });
}
