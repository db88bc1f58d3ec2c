//! Subcommand implementations. Each takes its fully merged config (file
//! values with flag overrides already applied) and returns a [`Failure`]
//! carrying the process exit code on error.

use std::fs;
use std::path::{Path, PathBuf};

use noisy_distill_core::datagen::{summarize, Dataset, SplitSelector};
use noisy_distill_core::eval::{
    ranking_csv, run_benchmark_seed, temperature_sweep, ExperimentReport, LambdaChoice, MethodRow,
    ReportMeta,
};
use noisy_distill_core::kgraph::{build_relation_matrix, KnowledgeGraph};
use noisy_distill_core::labels::{build_target_provider, PseudoLabelSpec, Strategy};
use noisy_distill_core::model::{train, MLPClassifier};
use noisy_distill_core::risk::{verify_prop1, CheckStatus};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cfg::{
    BenchmarkCmdConfig, GenDataConfig, RankCmdConfig, TempSweepCmdConfig, TrainCmdConfig,
    VerifyCmdConfig,
};
use crate::Failure;

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph, Failure> {
    KnowledgeGraph::load(path)
        .map_err(|e| Failure::usage(format!("cannot load graph {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path)
        .map_err(|e| Failure::usage(format!("cannot load dataset {}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn gen_data(cfg: &GenDataConfig) -> Result<(), Failure> {
    let (data, graph) = noisy_distill_core::datagen::generate(&cfg.spec)?;
    let s = summarize(&data);
    println!(
        "dataset: {} records, {} labels, {} features",
        data.records.len(),
        data.label_count(),
        data.d
    );
    println!(
        "splits: clean-train {}, noisy-train {}, dev {}, test {}",
        s.clean_train, s.noisy_train, s.dev, s.test
    );
    println!(
        "noise: {:.1}% of noisy-train records corrupted, mean squared label distance {:.3}",
        100.0 * s.corrupted_fraction,
        s.mean_label_distance
    );
    data.save(&cfg.dataset_out)?;
    println!("wrote {}", cfg.dataset_out.display());
    graph.save(&cfg.graph_out)?;
    println!("wrote {}", cfg.graph_out.display());
    Ok(())
}

fn strategy_blends(strategy: Strategy) -> bool {
    matches!(
        strategy,
        Strategy::Distill | Strategy::GuidedDistill | Strategy::Smooth | Strategy::Bootstrap
    )
}

pub fn train_cmd(cfg: &TrainCmdConfig) -> Result<(), Failure> {
    let data = load_dataset(&cfg.dataset)?;
    let sel = SplitSelector::parse(&cfg.split)?;
    let lambda = match cfg.lambda {
        Some(LambdaChoice::Auto) => {
            return Err(Failure::usage(
                "lambda \"auto\" is only supported by the benchmark command; pass a number",
            ))
        }
        Some(LambdaChoice::Fixed(v)) => v,
        None if strategy_blends(cfg.strategy) => {
            return Err(Failure::usage(format!(
                "strategy {} blends targets and requires a lambda value",
                cfg.strategy
            )))
        }
        None => 1.0,
    };
    let teacher = match &cfg.teacher {
        Some(p) => Some(MLPClassifier::load_json(p).map_err(|e| {
            Failure::usage(format!("cannot load teacher model {}: {e}", p.display()))
        })?),
        None => None,
    };
    let mut spec = PseudoLabelSpec::new(cfg.strategy, lambda).with_temperature(cfg.temperature);
    if cfg.strategy == Strategy::GuidedDistill {
        let gpath = cfg
            .graph
            .as_ref()
            .ok_or_else(|| Failure::usage("strategy guided-distill requires a graph path"))?;
        let graph = load_graph(gpath)?;
        spec = spec.with_relation_matrix(build_relation_matrix(&graph, &data.labels, cfg.beta)?);
    }
    let mut provider = build_target_provider(&spec, &data, sel, teacher.as_ref())?;
    let (model, history) = train(&data, sel, &cfg.hidden, provider.as_mut(), &cfg.train)?;

    let dims: Vec<String> = model.layer_dims().iter().map(|d| d.to_string()).collect();
    println!(
        "trained {} model ({}) on {} records of split {sel}",
        cfg.strategy,
        dims.join(" -> "),
        data.indices(sel).len()
    );
    println!(
        "best dev mAP {:.4} at epoch {} of {}",
        history.dev_map[history.best_epoch], history.best_epoch, cfg.train.epochs
    );
    model.save_json(&cfg.model_out)?;
    println!("wrote {}", cfg.model_out.display());
    if let Some(hpath) = &cfg.history_out {
        let json = serde_json::to_string_pretty(&history).map_err(Failure::from)?;
        write_file(hpath, &(json + "\n"))?;
    }
    Ok(())
}

pub fn benchmark(cfg: &BenchmarkCmdConfig, jobs: usize, config_bytes: &[u8]) -> Result<(), Failure> {
    if jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    cfg.bench.validate()?;
    let dataset_bytes = fs::read(&cfg.dataset)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", cfg.dataset.display())))?;
    let data = load_dataset(&cfg.dataset)?;
    let graph = match &cfg.graph {
        Some(p) => Some(load_graph(p)?),
        None => None,
    };

    // Seeds are independent runs; rows are collected back in seed order so
    // the report does not depend on the worker count.
    let run_seed = |&seed: &u64| -> noisy_distill_core::Result<Vec<MethodRow>> {
        run_benchmark_seed(&data, graph.as_ref(), &cfg.methods, &cfg.bench, seed)
    };
    let per_seed: Vec<Vec<MethodRow>> = if jobs == 1 {
        cfg.bench.seeds.iter().map(run_seed).collect::<noisy_distill_core::Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Failure::usage(format!("cannot build worker pool: {e}")))?;
        pool.install(|| {
            cfg.bench
                .seeds
                .par_iter()
                .map(run_seed)
                .collect::<noisy_distill_core::Result<Vec<_>>>()
        })?
    };

    let mut report = ExperimentReport::new(per_seed.concat());
    report.metadata = ReportMeta {
        dataset_hash: sha256_hex(&dataset_bytes),
        config_hash: sha256_hex(config_bytes),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };

    println!("{:<22} {:>7} {:>5} {:>9} {:>9} {:>6}", "method", "lambda", "T", "dev mAP", "test mAP", "seeds");
    for a in report.aggregate() {
        let lambda = a.lambda.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let temp = a.temperature.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<22} {:>7} {:>5} {:>9.4} {:>9.4} {:>6}",
            a.method.to_string(),
            lambda,
            temp,
            a.dev_map,
            a.test_map,
            a.seeds
        );
    }

    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    let json = serde_json::to_string_pretty(&report).map_err(Failure::from)?;
    write_file(&cfg.out_dir.join("report.json"), &(json + "\n"))?;
    write_file(&cfg.out_dir.join("report.csv"), &report.to_csv())?;
    for &seed in &cfg.bench.seeds {
        let rows: Vec<MethodRow> =
            report.rows.iter().filter(|r| r.seed == seed).cloned().collect();
        let path = cfg.out_dir.join(format!("seed-{seed}.csv"));
        write_file(&path, &ExperimentReport::new(rows).to_csv())?;
    }
    write_file(&cfg.out_dir.join("aggregate.csv"), &report.aggregate_csv())?;
    Ok(())
}

pub fn verify(cfg: &VerifyCmdConfig) -> Result<(), Failure> {
    let report = verify_prop1(&cfg.check)?;
    println!(
        "mode {}: n {}, labels {}, seed {}",
        report.mode, report.n, report.label_count, report.seed
    );
    println!(
        "R_y {:.4}  R_s {:.4}  R_u {:.4}  cross-term {:.4} (se {:.4})",
        report.r_y, report.r_s, report.r_u, report.cross_term, report.cross_term_se
    );
    println!(
        "lambda*: predicted {:.4}, empirical {:.4}; min risk: predicted {:.4}, empirical {:.4}",
        report.lambda_star_predicted,
        report.lambda_star_empirical,
        report.r_min_predicted,
        report.r_min_empirical
    );
    println!(
        "quadratic fit residual {:.2e}; ensemble bias {:.4}, variance {:.4}",
        report.fit_residual, report.bias, report.variance
    );
    for c in &report.checks {
        let tag = match c.status {
            CheckStatus::Passed => "pass",
            CheckStatus::Failed => "FAIL",
            CheckStatus::NotApplicable => "n/a ",
        };
        println!("[{tag}] {}: {}", c.name, c.detail);
    }
    let json = serde_json::to_string_pretty(&report).map_err(Failure::from)?;
    write_file(&cfg.report_out, &(json + "\n"))?;
    write_file(&cfg.curve_out, &report.curve_csv())?;

    if report.all_passed() {
        Ok(())
    } else {
        let mut msg = String::from("checks outside tolerance:");
        for c in report.checks.iter().filter(|c| c.status == CheckStatus::Failed) {
            msg.push_str(&format!("\n  {}: {}", c.name, c.detail));
        }
        Err(Failure::tolerance(msg))
    }
}

pub fn temp_sweep(cfg: &TempSweepCmdConfig) -> Result<(), Failure> {
    let data = load_dataset(&cfg.dataset)?;
    let graph = match &cfg.graph {
        Some(p) => Some(load_graph(p)?),
        None => None,
    };
    let rows = temperature_sweep(&data, graph.as_ref(), &cfg.temperatures, &cfg.bench)?;
    for &seed in &cfg.bench.seeds {
        let per_seed: Vec<&MethodRow> = rows.iter().filter(|r| r.seed == seed).collect();
        for r in &per_seed {
            println!(
                "seed {seed} T {:>4}: dev mAP {:.4}, test mAP {:.4}",
                r.temperature.unwrap_or(1.0),
                r.dev_map,
                r.test_map
            );
        }
        let min = per_seed.iter().map(|r| r.test_map).fold(f64::INFINITY, f64::min);
        let max = per_seed.iter().map(|r| r.test_map).fold(f64::NEG_INFINITY, f64::max);
        println!("seed {seed} test mAP spread {:.4} (min {min:.4}, max {max:.4})", max - min);
    }
    write_file(&cfg.out, &ExperimentReport::new(rows).to_csv())?;
    Ok(())
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn rank(cfg: &RankCmdConfig, guided_required: bool) -> Result<(), Failure> {
    let class = cfg
        .class
        .as_deref()
        .ok_or_else(|| Failure::usage("class is required (config key \"class\" or --class)"))?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| Failure::usage("lambda is required (config key \"lambda\" or --lambda)"))?;
    let data = load_dataset(&cfg.dataset)?;
    let model = MLPClassifier::load_json(&cfg.model).map_err(|e| {
        Failure::usage(format!("cannot load model {}: {e}", cfg.model.display()))
    })?;
    let graph = match &cfg.graph {
        Some(p) => Some(load_graph(p)?),
        None => None,
    };
    if guided_required && graph.is_none() {
        return Err(Failure::usage("--guided requires a graph path in the config"));
    }
    let class_index = data.label_index(class).map_err(|_| {
        Failure::usage(format!(
            "unknown class: {class}; valid classes: {}",
            data.labels.join(", ")
        ))
    })?;

    let spec = PseudoLabelSpec::new(Strategy::Distill, lambda).with_temperature(cfg.temperature);
    let entries = noisy_distill_core::eval::rank_by_pseudo(&data, class_index, &spec, &model)?;
    println!("class {class}: {} observed positives in the training pool", entries.len());
    write_file(&suffixed(&cfg.out_prefix, ".distill.csv"), &ranking_csv(&entries))?;

    if let Some(g) = &graph {
        let gspec = PseudoLabelSpec::new(Strategy::GuidedDistill, lambda)
            .with_temperature(cfg.temperature)
            .with_relation_matrix(build_relation_matrix(g, &data.labels, cfg.beta)?);
        let gentries = noisy_distill_core::eval::rank_by_pseudo(&data, class_index, &gspec, &model)?;
        write_file(&suffixed(&cfg.out_prefix, ".guided.csv"), &ranking_csv(&gentries))?;
    }
    Ok(())
}
