use super::manifest::{file_digest, sha256_hex, write_atomic};
use super::{
    CheckArgs, CliError, DataArgs, ExportArgs, InvolutivityArgs, NoiseArgs, Outcome, PathArgs,
    SpectrumArgs, TrainArgs,
};
use crate::data::{self, Dataset};
use crate::geometry::{self, norm, GeometryError, RowSpace};
use crate::net::{self, Activation, NetParams};
use crate::paths::{self, PathRecord};
use crate::rng;
use crate::suite;
use crate::train::{self, Checkpoint, TrainConfig, Trainer};
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_data(args: &DataArgs, outcome: &mut Outcome) -> Result<Dataset, CliError> {
    let sources = [args.images.is_some(), args.synthetic, args.glyphs.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if sources != 1 {
        return Err(usage("give exactly one of --images/--labels, --synthetic, --glyphs"));
    }
    let ds = if let (Some(img), Some(lbl)) = (&args.images, &args.labels) {
        let images = data::load_idx_images(img).map_err(|e| CliError::io(img, e))?;
        let labels = data::load_idx_labels(lbl).map_err(|e| CliError::io(lbl, e))?;
        outcome
            .inputs
            .insert(img.display().to_string(), file_digest(img)?);
        outcome
            .inputs
            .insert(lbl.display().to_string(), file_digest(lbl)?);
        data::make_dataset(&images, &labels, args.classes.unwrap_or(10))
            .map_err(|e| usage(e.to_string()))?
    } else if args.synthetic {
        outcome.seeds.insert("data".into(), args.data_seed);
        data::synth_blobs(
            args.classes.unwrap_or(3),
            args.per_class,
            args.dim,
            args.spread,
            args.data_seed,
        )
        .map_err(|e| usage(e.to_string()))?
    } else {
        let count = args.glyphs.expect("counted above");
        outcome.seeds.insert("data".into(), args.data_seed);
        let (images, labels) = data::synth_glyphs(count, args.data_seed);
        data::make_dataset(&images, &labels, 10).map_err(|e| usage(e.to_string()))?
    };
    let mut ds = match args.limit {
        Some(k) => ds.truncated(k),
        None => ds,
    };
    if args.standardize {
        ds.standardize(data::MNIST_MEAN, data::MNIST_STD)
            .map_err(|e| usage(e.to_string()))?;
    }
    outcome
        .summary
        .insert("dataset_fingerprint".into(), json!(hex::encode(ds.fingerprint())));
    Ok(ds)
}

fn load_params(path: &Path, outcome: &mut Outcome) -> Result<Checkpoint, CliError> {
    let ckpt = train::load_checkpoint(path).map_err(|e| CliError::io(path, e))?;
    outcome
        .inputs
        .insert(path.display().to_string(), file_digest(path)?);
    Ok(ckpt)
}

fn check_dims(params: &NetParams, ds: &Dataset) -> Result<(), CliError> {
    if params.input_dim() != ds.n || params.classes() != ds.classes {
        return Err(usage(format!(
            "checkpoint expects n={} C={}, data has n={} C={}",
            params.input_dim(),
            params.classes(),
            ds.n,
            ds.classes
        )));
    }
    Ok(())
}

fn emit(out: &Path, name: &str, bytes: &[u8], outcome: &mut Outcome) -> Result<(), CliError> {
    write_atomic(&out.join(name), bytes)?;
    outcome.artifacts.insert(name.to_string(), sha256_hex(bytes));
    Ok(())
}

fn index(ds: &Dataset, i: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    ds.images
        .get(i)
        .cloned()
        .ok_or_else(|| usage(format!("{flag} {i} out of range for {} examples", ds.len())))
}

pub(crate) fn train(args: &TrainArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let ds = load_data(&args.data, &mut outcome)?;
    if ds.is_empty() {
        return Err(usage("training data is empty"));
    }
    let mut dims = vec![ds.n];
    for h in args.hidden.iter().filter(|h| !h.trim().is_empty()) {
        dims.push(h.trim().parse().map_err(|_| usage(format!("bad hidden width {h:?}")))?);
    }
    dims.push(ds.classes);
    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        trace_every: args.trace_every,
    };
    config.validate().map_err(usage)?;
    say!(
        "train: dims={dims:?} lr={} batch={} epochs={} seed={} examples={}",
        config.learning_rate,
        config.batch_size,
        config.epochs,
        config.seed,
        ds.len()
    );
    outcome.seeds.insert("train".into(), args.seed);
    let mut trainer = Trainer::from_seed(&dims, config).map_err(|e| usage(e.to_string()))?;
    emit(out, "ckpt_epoch_000.bin", &train::encode_checkpoint(&trainer.checkpoint(&ds)), &mut outcome)?;
    let mut epochs_csv = String::from("epoch,step,mean_loss,train_accuracy,trace_ema\n");
    let mut ends = Vec::new();
    let mut accuracy = train::accuracy(&trainer.params, &ds).map_err(|e| usage(e.to_string()))?;
    for _ in 0..config.epochs {
        let summary = trainer.run_epoch(&ds).map_err(|e| usage(e.to_string()))?;
        accuracy = train::accuracy(&trainer.params, &ds).map_err(|e| usage(e.to_string()))?;
        let ema = trainer.trace.ema_at(summary.step.saturating_sub(1)).unwrap_or(f64::NAN);
        let _ = writeln!(
            epochs_csv,
            "{},{},{},{},{}",
            summary.epoch, summary.step, summary.mean_loss, accuracy, ema
        );
        say!(
            "epoch {:>3} step {:>6} loss {:.5} acc {:.4} trace_ema {:.5}",
            summary.epoch, summary.step, summary.mean_loss, accuracy, ema
        );
        ends.push(summary.step.saturating_sub(1));
        let name = format!("ckpt_epoch_{:03}.bin", summary.epoch);
        emit(out, &name, &train::encode_checkpoint(&trainer.checkpoint(&ds)), &mut outcome)?;
    }
    emit(out, "trace.csv", trainer.trace.to_csv().as_bytes(), &mut outcome)?;
    emit(out, "epochs.csv", epochs_csv.as_bytes(), &mut outcome)?;
    if let Some(sel) = train::select_checkpoint(&trainer.trace, &ends) {
        let epoch = sel + 1;
        say!("selected checkpoint: epoch {epoch}");
        outcome.summary.insert("selected_epoch".into(), json!(epoch));
        outcome
            .summary
            .insert("selected_checkpoint".into(), json!(format!("ckpt_epoch_{epoch:03}.bin")));
    }
    outcome.summary.insert("train_accuracy".into(), json!(accuracy));
    outcome.summary.insert("steps".into(), json!(trainer.step));
    say!("train accuracy: {accuracy:.4}");
    Ok(outcome)
}

pub(crate) fn check(args: &CheckArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    if args.points == 0 {
        return Err(usage("--points must be at least 1"));
    }
    outcome.seeds.insert("check".into(), args.seed);
    let params = match &args.checkpoint {
        Some(p) => load_params(p, &mut outcome)?.params,
        None => NetParams::init(&args.dims, Activation::Relu, &mut rng::stream(args.seed, "init"))
            .map_err(|e| usage(e.to_string()))?,
    };
    let has_data = args.data.images.is_some() || args.data.synthetic || args.data.glyphs.is_some();
    let mut sampler = rng::stream(args.seed, "points");
    let points = if has_data {
        let ds = load_data(&args.data, &mut outcome)?;
        if ds.n != params.input_dim() {
            return Err(usage("data dimension does not match the network"));
        }
        use rand::seq::IndexedRandom;
        let idx: Vec<usize> = (0..ds.len()).collect();
        idx.choose_multiple(&mut sampler, args.points.min(ds.len()))
            .map(|&i| ds.images[i].clone())
            .collect()
    } else {
        suite::uniform_points(params.input_dim(), args.points, &mut sampler)
    };
    let report = suite::run_suites(
        &params,
        &points,
        suite::SuiteOptions::default(),
        &mut rng::stream(args.seed, "vectors"),
    );
    for r in &report.results {
        say!(
            "{:<16} {:>5} checked {:>4} failed  worst ratio {:.3e}  {}",
            r.name,
            r.checked,
            r.failures,
            r.worst,
            if r.passed() { "PASS" } else { "FAIL" }
        );
        if let Some(note) = &r.note {
            say!("    {note}");
        }
    }
    emit(out, "check.csv", report.to_csv().as_bytes(), &mut outcome)?;
    outcome.summary.insert("passed".into(), json!(report.passed()));
    if !report.passed() {
        let failed: Vec<&str> = report
            .results
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.name)
            .collect();
        outcome.suite_failed = Some(failed.join(", "));
    }
    Ok(outcome)
}

pub(crate) fn spectrum(args: &SpectrumArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let params = load_params(&args.checkpoint, &mut outcome)?.params;
    let ds = load_data(&args.data, &mut outcome)?;
    check_dims(&params, &ds)?;
    let c = params.classes();
    let mut csv = String::from("point_id");
    for k in 1..=c {
        let _ = write!(csv, ",lambda_{k}");
    }
    csv.push_str(",trace,soft_rank\n");
    let mut mean_trace = 0.0;
    let count = args.points.min(ds.len());
    for i in 0..count {
        let g = geometry::local_data_matrix(&params, &ds.images[i]).map_err(|e| usage(e.to_string()))?;
        let s = geometry::spectrum(&g);
        let _ = write!(csv, "{i}");
        for l in &s.eigenvalues {
            let _ = write!(csv, ",{l}");
        }
        let _ = writeln!(csv, ",{},{}", s.trace, s.soft_rank);
        mean_trace += s.trace / count as f64;
    }
    emit(out, "spectrum.csv", csv.as_bytes(), &mut outcome)?;
    say!("points {count}, mean trace {mean_trace:.6}");
    outcome.summary.insert("mean_trace".into(), json!(mean_trace));
    Ok(outcome)
}

fn parse_pairs(spec: &str, classes: usize) -> Result<Vec<(usize, usize)>, CliError> {
    if spec == "all" {
        return Ok((0..classes)
            .flat_map(|i| (i + 1..classes).map(move |j| (i, j)))
            .collect());
    }
    spec.split(',')
        .map(|p| {
            let (a, b) = p
                .split_once(':')
                .ok_or_else(|| usage(format!("bad pair {p:?}, expected i:j")))?;
            let i: usize = a.trim().parse().map_err(|_| usage(format!("bad class {a:?}")))?;
            let j: usize = b.trim().parse().map_err(|_| usage(format!("bad class {b:?}")))?;
            if i == j || i >= classes || j >= classes {
                return Err(usage(format!("pair {i}:{j} invalid for {classes} classes")));
            }
            Ok((i, j))
        })
        .collect()
}

pub(crate) fn involutivity(args: &InvolutivityArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let params = load_params(&args.checkpoint, &mut outcome)?.params;
    let ds = load_data(&args.data, &mut outcome)?;
    check_dims(&params, &ds)?;
    let pairs = parse_pairs(&args.pairs, params.classes())?;
    let mut csv = String::from("point_id,i,j,in_span,out_span,rel_residual\n");
    let mut pcsv = String::from("point_id,i,j,in_span,out_span,rel_residual\n");
    let (mut accepted, mut skipped) = (0usize, 0usize);
    let (mut max_rel, mut max_param_rel) = (0.0f64, 0.0f64);
    for (id, x) in ds.images.iter().enumerate() {
        if accepted == args.points {
            break;
        }
        let mut rows = Vec::with_capacity(pairs.len());
        let mut crossed = false;
        for &(i, j) in &pairs {
            match geometry::involutivity_residual(&params, x, i, j, args.h) {
                Ok(r) => rows.push(r),
                Err(GeometryError::RegionCrossing { .. }) => {
                    crossed = true;
                    break;
                }
                Err(e) => return Err(usage(e.to_string())),
            }
        }
        if crossed {
            skipped += 1;
            continue;
        }
        accepted += 1;
        for r in rows {
            max_rel = max_rel.max(r.relative);
            let _ = writeln!(csv, "{id},{},{},{},{},{}", r.i, r.j, r.in_span, r.out_span, r.relative);
        }
        if args.param_space {
            for &(i, j) in &pairs {
                match geometry::param_involutivity_residual(&params, x, i, j, args.h) {
                    Ok(r) => {
                        max_param_rel = max_param_rel.max(r.relative);
                        let _ = writeln!(
                            pcsv,
                            "{id},{},{},{},{},{}",
                            r.i, r.j, r.in_span, r.out_span, r.relative
                        );
                    }
                    Err(GeometryError::RegionCrossing { .. }) => {}
                    Err(e) => return Err(usage(e.to_string())),
                }
            }
        }
    }
    emit(out, "residuals.csv", csv.as_bytes(), &mut outcome)?;
    say!("points {accepted} (skipped {skipped} near a kink), max relative residual {max_rel:.3e}");
    outcome.summary.insert("points".into(), json!(accepted));
    outcome.summary.insert("skipped".into(), json!(skipped));
    outcome.summary.insert("max_rel_residual".into(), json!(max_rel));
    if args.param_space {
        emit(out, "param_residuals.csv", pcsv.as_bytes(), &mut outcome)?;
        say!("parameter space: max relative residual {max_param_rel:.3e}");
        outcome
            .summary
            .insert("max_param_rel_residual".into(), json!(max_param_rel));
    }
    Ok(outcome)
}

/// Moves `x` off its leaf: a random direction projected onto `ker G(x)`, scaled to `norm`.
pub fn kernel_perturbation(
    params: &NetParams,
    x: &[f64],
    magnitude: f64,
    seed: u64,
) -> Result<Vec<f64>, net::NetError> {
    if magnitude == 0.0 {
        return Ok(x.to_vec());
    }
    let jac = net::input_jacobian(params, x)?;
    let r = paths::random_direction(x.len(), seed);
    let k = RowSpace::new(&jac.rows).project_complement(&r);
    let kn = norm(&k);
    Ok(x.iter().zip(&k).map(|(a, b)| a + magnitude * b / kn).collect())
}

fn emit_record(
    out: &Path,
    stem: &str,
    record: &PathRecord,
    stride: usize,
    standardized: bool,
    outcome: &mut Outcome,
) -> Result<(), CliError> {
    emit(out, &format!("{stem}.csv"), record.to_csv().as_bytes(), outcome)?;
    emit(out, &format!("{stem}.points"), &record.points_to_bytes(), outcome)?;
    let n = record.points[0].len();
    let layout = {
        let side = (n as f64).sqrt().round() as usize;
        (side * side != n).then_some((1, n))
    };
    // Frames are drawn in pixel units, so undo the standardization first.
    let pixels;
    let shown = if standardized {
        let mut r = record.clone();
        for p in &mut r.points {
            p.iter_mut().for_each(|v| *v = *v * data::MNIST_STD + data::MNIST_MEAN);
        }
        pixels = r;
        &pixels
    } else {
        record
    };
    let strip = paths::path_to_strip(shown, stride, layout).map_err(|e| usage(e.to_string()))?;
    emit(out, &format!("{stem}.pgm"), &strip.to_pgm(), outcome)?;
    emit(out, &format!("{stem}_frames.csv"), strip.sidecar.as_bytes(), outcome)?;
    outcome.summary.insert("status".into(), json!(record.status.to_string()));
    outcome.summary.insert("steps".into(), json!(record.num_steps()));
    outcome.summary.insert("final_dist".into(), json!(record.final_dist()));
    outcome
        .summary
        .insert("rank_changes".into(), json!(record.rank_changes.len()));
    outcome.summary.insert(
        "monotonicity_violations".into(),
        json!(record.monotonicity_violations),
    );
    Ok(())
}

pub(crate) fn path(args: &PathArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let params = load_params(&args.checkpoint, &mut outcome)?.params;
    let ds = load_data(&args.data, &mut outcome)?;
    check_dims(&params, &ds)?;
    let clean = index(&ds, args.src, "--src")?;
    let dest = index(&ds, args.dst, "--dst")?;
    if args.noise < 0.0 {
        return Err(usage("--noise must be >= 0"));
    }
    outcome.seeds.insert("noise".into(), args.noise_seed);
    let source = kernel_perturbation(&params, &clean, args.noise, args.noise_seed)
        .map_err(|e| usage(e.to_string()))?;
    let initial = norm(&source.iter().zip(&dest).map(|(a, b)| a - b).collect::<Vec<_>>());
    let stop_tol = args.stop_frac * initial;
    let record = paths::horizontal_path(&params, &source, &dest, args.alpha, args.steps, stop_tol)
        .map_err(|e| usage(e.to_string()))?;
    say!(
        "path {} -> {}: {} after {} steps, distance {:.4} -> {:.4}",
        args.src,
        args.dst,
        record.status,
        record.num_steps(),
        initial,
        record.final_dist()
    );
    emit_record(out, "path", &record, args.stride, args.data.standardize, &mut outcome)?;
    outcome.summary.insert("initial_dist".into(), json!(initial));
    Ok(outcome)
}

pub(crate) fn noise(args: &NoiseArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let params = load_params(&args.checkpoint, &mut outcome)?.params;
    let ds = load_data(&args.data, &mut outcome)?;
    check_dims(&params, &ds)?;
    let x0 = index(&ds, args.idx, "--idx")?;
    outcome.seeds.insert("walk".into(), args.seed);
    let record = paths::kernel_walk(&params, &x0, args.seed, args.alpha, args.steps)
        .map_err(|e| usage(e.to_string()))?;
    let start_pred = record.steps[0].pred;
    let stable = record.steps.iter().filter(|s| s.pred == start_pred).count();
    say!(
        "walk from {}: {} after {} steps, |x_T - x_0| = {:.4}, class {} kept on {}/{} steps",
        args.idx,
        record.status,
        record.num_steps(),
        record.final_dist(),
        start_pred,
        stable,
        record.steps.len()
    );
    emit_record(out, "walk", &record, args.stride, args.data.standardize, &mut outcome)?;
    Ok(outcome)
}

pub(crate) fn export(args: &ExportArgs, out: &Path) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    if args.data.standardize {
        return Err(usage("export writes raw bytes; drop --standardize"));
    }
    let ds = load_data(&args.data, &mut outcome)?;
    let cols = args.cols.unwrap_or(args.rows);
    let (images, labels) = ds.to_idx(args.rows, cols).map_err(|e| usage(e.to_string()))?;
    emit(out, "images.idx", &data::encode_idx_images(&images), &mut outcome)?;
    emit(out, "labels.idx", &data::encode_idx_labels(&labels), &mut outcome)?;
    say!("exported {} examples to {}", ds.len(), out.display());
    Ok(outcome)
}
