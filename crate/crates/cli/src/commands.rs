use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use bandbatch_core::batching::default_chunk_rows;
use bandbatch_core::losses::format_g17;
use bandbatch_core::similarity::estimate_quantile_threshold;
use bandbatch_core::stats::{loglog_slope, mean_stddev};
use bandbatch_core::synth::random_pair;
use bandbatch_core::tensor_io::permutation_to_string;
use bandbatch_core::{
    build_sparse_graph, cuthill_mckee, exhaustive_min_gap, exhaustive_qap, exhaustive_qbap,
    gap_report, gcbs_pipeline, hard_negative_batches, load_embeddings, load_permutation,
    random_batches, save_permutation, sequential_batches, BatchAssignment, EmbeddingFormat,
    EmbeddingPair, Error, OracleResult, PipelineConfig, Strategy, Temperature,
};

use crate::{
    AnalyzeArgs, BenchArgs, Cli, Command, CompareArgs, Inputs, OracleArgs, PermuteArgs,
    PipelineArgs,
};

/// 2 for bad parameters, 1 for everything else (I/O, format, data).
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<Error>())
        .map_or(1, |e| if e.is_parameter_error() { 2 } else { 1 })
}

fn parameter(msg: impl Into<String>) -> anyhow::Error {
    Error::Parameter(msg.into()).into()
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(parameter("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Permute(args) => permute(args, out),
        Command::Analyze(args) => analyze(args, out),
        Command::Compare(args) => compare(args, out),
        Command::Bench(args) => bench(args, out),
        Command::Oracle(args) => oracle(args, out),
    }
}

fn load_pair(inputs: &Inputs) -> Result<EmbeddingPair> {
    let load = |path: &Path| {
        let format = inputs
            .format
            .unwrap_or_else(|| EmbeddingFormat::from_path(path));
        load_embeddings(path, format)
    };
    let pair = EmbeddingPair::new(load(&inputs.x)?, load(&inputs.y)?)?;
    Ok(pair.normalized()?)
}

fn pipeline_config(p: &PipelineArgs, k: usize) -> PipelineConfig {
    PipelineConfig {
        quantile: p.quantile,
        batch_size: k,
        chunk_rows: p.chunk_rows,
        reverse: p.reverse_cm,
    }
}

/// Builds the batches for `strategy`, plus the quantile to tag the report with.
fn assign(
    pair: &EmbeddingPair,
    k: usize,
    strategy: Strategy,
    seed: u64,
    p: &PipelineArgs,
) -> Result<(BatchAssignment, Option<f64>)> {
    Ok(match strategy {
        Strategy::Gcbs => {
            let o = gcbs_pipeline(pair, &pipeline_config(p, k))?;
            eprintln!(
                "threshold {} at q={}, {} edges, max degree {}, bandwidth {}",
                format_g17(o.threshold.value),
                p.quantile,
                o.edge_count,
                o.max_degree,
                o.bandwidth
            );
            (o.batches, Some(p.quantile))
        }
        Strategy::Random => (random_batches(pair.len(), k, seed)?, None),
        Strategy::HardNeg1 => (hard_negative_batches(pair, k, seed)?, None),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn permute(args: PermuteArgs, out: &mut impl Write) -> Result<()> {
    let tau = Temperature::new(args.tau)?;
    let pair = load_pair(&args.inputs)?;
    let (b, quantile) = assign(
        &pair,
        args.batch_size,
        args.strategy,
        args.seed,
        &args.pipeline,
    )?;

    if let Some(path) = &args.out_perm {
        let p = b.permutation().ok_or_else(|| {
            parameter(format!(
                "{} batches repeat samples and have no permutation",
                args.strategy
            ))
        })?;
        save_permutation(p, path)?;
    }
    if let Some(path) = &args.out_batches {
        write_file(path, &b.to_dump_string())?;
    }
    if args.report {
        let r = gap_report(&pair, &b, tau, args.strategy.as_str(), quantile)?;
        writeln!(out, "{}", r.to_json())?;
    } else if args.out_perm.is_none() && args.out_batches.is_none() {
        match b.permutation() {
            Some(p) => write!(out, "{}", permutation_to_string(p))?,
            None => write!(out, "{}", b.to_dump_string())?,
        }
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs, out: &mut impl Write) -> Result<()> {
    let tau = Temperature::new(args.tau)?;
    let pair = load_pair(&args.inputs)?;
    let (b, strategy, quantile) = match &args.perm {
        Some(path) => {
            let p = load_permutation(path)?;
            if p.len() != pair.len() {
                return Err(parameter(format!(
                    "{}: permutation has {} entries for {} samples",
                    path.display(),
                    p.len(),
                    pair.len()
                )));
            }
            (sequential_batches(&p, args.batch_size)?, "custom", None)
        }
        None => {
            let (b, q) = assign(
                &pair,
                args.batch_size,
                args.strategy,
                args.seed,
                &args.pipeline,
            )?;
            (b, args.strategy.as_str(), q)
        }
    };
    let r = gap_report(&pair, &b, tau, strategy, quantile)?;
    writeln!(out, "{}", r.to_json())?;
    Ok(())
}

fn summary_json(values: &[f64]) -> String {
    let (mean, stddev) = mean_stddev(values);
    format!(
        "{{\"mean\":{},\"stddev\":{}}}",
        format_g17(mean),
        format_g17(stddev)
    )
}

fn compare(args: CompareArgs, out: &mut impl Write) -> Result<()> {
    let tau = Temperature::new(args.tau)?;
    if args.seeds == 0 {
        return Err(parameter("--seeds must be at least 1"));
    }
    let pair = load_pair(&args.inputs)?;
    let k = args.batch_size;
    let mut reports = Vec::new();

    let (b, q) = assign(&pair, k, Strategy::Gcbs, args.seed, &args.pipeline)?;
    reports.push(gap_report(&pair, &b, tau, Strategy::Gcbs.as_str(), q)?);
    if k.is_multiple_of(2) && k <= 2 * pair.len() {
        let b = hard_negative_batches(&pair, k, args.seed)?;
        reports.push(gap_report(
            &pair,
            &b,
            tau,
            Strategy::HardNeg1.as_str(),
            None,
        )?);
    } else {
        eprintln!("skipping hardneg1: it needs an even batch size of at most 2N");
    }

    let mut train = Vec::new();
    let mut gap = Vec::new();
    for seed in args.seed..args.seed + args.seeds {
        let b = random_batches(pair.len(), k, seed)?;
        let r = gap_report(&pair, &b, tau, Strategy::Random.as_str(), None)?;
        train.push(r.train_loss);
        gap.push(r.gap);
        reports.push(r);
    }

    let mut json = String::from("{\"reports\":[");
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            json.push(',');
        }
        json.push_str(&r.to_json());
    }
    write!(
        json,
        "],\"random_summary\":{{\"seeds\":{},\"train_loss\":{},\"gap\":{}}}}}",
        args.seeds,
        summary_json(&train),
        summary_json(&gap)
    )?;
    writeln!(out, "{json}")?;
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let sizes = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| parameter(format!("invalid size {s:?} in --sizes")))
        })
        .collect::<Result<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(parameter("--sizes needs at least one value"));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
        return Err(parameter(format!(
            "bench sizes must be at least 2, got {n}"
        )));
    }
    Ok(sizes)
}

fn bench(args: BenchArgs, out: &mut impl Write) -> Result<()> {
    let sizes = parse_sizes(&args.sizes)?;
    writeln!(out, "n,stage,seconds")?;
    let mut totals = Vec::new();
    for &n in &sizes {
        let pair = random_pair(n, args.dim, args.seed)?;
        let chunk = args
            .pipeline
            .chunk_rows
            .unwrap_or_else(|| default_chunk_rows(n));

        let start = Instant::now();
        let threshold = estimate_quantile_threshold(&pair, args.pipeline.quantile, chunk)?;
        let t_quantile = start.elapsed();
        let graph = build_sparse_graph(&pair, &threshold)?;
        let t_graph = start.elapsed();
        let perm = cuthill_mckee(&graph, args.pipeline.reverse_cm)?;
        let t_order = start.elapsed();
        sequential_batches(&perm, args.batch_size.min(n))?;
        let total = start.elapsed().as_secs_f64();

        let stages = [
            ("quantile", t_quantile.as_secs_f64()),
            ("graph", (t_graph - t_quantile).as_secs_f64()),
            ("ordering", (t_order - t_graph).as_secs_f64()),
            ("total", total),
        ];
        for (stage, seconds) in stages {
            writeln!(out, "{n},{stage},{}", format_g17(seconds))?;
        }
        out.flush()?;
        totals.push((n as f64, total));
    }
    match loglog_slope(&totals) {
        Some(slope) => eprintln!("log-log slope of total time vs N: {slope:.3}"),
        None => eprintln!("log-log slope needs at least two distinct sizes"),
    }
    Ok(())
}

fn oracle_json(r: Result<OracleResult, Error>) -> Result<String> {
    let r = match r {
        Ok(r) => r,
        Err(Error::ObjectiveUndefined(_)) => return Ok("null".into()),
        Err(e) => return Err(e.into()),
    };
    let mut s = format!(
        "{{\"value\":{},\"enumerated\":{},\"batches\":[",
        format_g17(r.best_value),
        r.enumerated_count
    );
    for (i, block) in r.best_assignment.canonical_blocks().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let items: Vec<String> = block.iter().map(usize::to_string).collect();
        write!(s, "[{}]", items.join(","))?;
    }
    s.push_str("]}");
    Ok(s)
}

fn oracle(args: OracleArgs, out: &mut impl Write) -> Result<()> {
    let tau = Temperature::new(args.tau)?;
    let pair = load_pair(&args.inputs)?;
    let k = args.batch_size;
    let qap = oracle_json(exhaustive_qap(&pair, k))?;
    let qbap = oracle_json(exhaustive_qbap(&pair, k))?;
    let gap = oracle_json(exhaustive_min_gap(&pair, k, tau))?;
    writeln!(
        out,
        "{{\"n\":{},\"k\":{k},\"tau\":{},\"qbap\":{qbap},\"qap\":{qap},\"min_gap\":{gap}}}",
        pair.len(),
        format_g17(tau.value())
    )?;
    Ok(())
}
