use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use skil_core::autodiff::{central_differences, compare_gradients, Tape, Var};
use skil_core::deform::{deform, deform_combined_traced, draw_shift, DeformKind};
use skil_core::grid::{load_field, load_mask, save_field, save_mask, DEFAULT_THRESHOLD};
use skil_core::losses::{fit_logits, loss as eval_loss, mixed_loss, soft_dice_loss, LossKind};
use skil_core::metrics::{evaluate_dirs, write_csv};
use skil_core::morphology::{smooth_diffuse, soft_skeleton};
use skil_core::{BinaryMask, ScalarField};

use crate::config::{Settings, UsageError};
use crate::manifest::{beside, image_seed, FileOutcome, RunManifest};

/// Largest accepted gradient-check instance side.
const MAX_GRADCHECK_SIZE: usize = 64;
const GRADCHECK_TOLERANCE: f64 = 1e-3;

fn selector(name: &str) -> Result<LossKind> {
    name.parse()
        .map_err(|e: skil_core::Error| UsageError(e.to_string()).into())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn metrics(
    settings: &Settings,
    pred_dir: &Path,
    label_dir: &Path,
    out: Option<&Path>,
    json: bool,
) -> Result<u8> {
    let report = evaluate_dirs(pred_dir, label_dir, &settings.metric)?;
    let mut buf = Vec::new();
    if json {
        serde_json::to_writer_pretty(&mut buf, &report)?;
        buf.push(b'\n');
    } else {
        write_csv(&report, &mut buf)?;
    }
    match out {
        Some(path) => {
            fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?;
            let mut outcomes: Vec<FileOutcome> = report
                .rows
                .iter()
                .map(|r| FileOutcome::ok(&r.file, json!(r.scores)))
                .collect();
            outcomes.extend(
                report
                    .failures
                    .iter()
                    .map(|f| FileOutcome::failed(&f.file, &f.error)),
            );
            outcomes.extend(
                report
                    .unmatched
                    .iter()
                    .map(|f| FileOutcome::failed(f, "no file with the same stem")),
            );
            RunManifest::new(settings, outcomes).write(&beside(path))?;
        }
        None => std::io::stdout().write_all(&buf)?,
    }

    for f in &report.failures {
        eprintln!("failed: {}: {}", f.file, f.error);
    }
    for f in &report.unmatched {
        eprintln!("unmatched: {f}");
    }
    Ok(if report.failures.is_empty() && report.unmatched.is_empty() {
        0
    } else {
        2
    })
}

pub fn loss(settings: &Settings, pred: &Path, label: &Path, name: &str) -> Result<u8> {
    let kind = selector(name)?;
    let pred = load_field(pred)?;
    let label = load_mask(label, DEFAULT_THRESHOLD)?;
    let cfg = &settings.loss;
    let tape = Tape::new();
    let p = tape.constant(pred);
    let scalar = |v: Var<'_>| v.scalar().expect("losses are scalars");
    let total = scalar(mixed_loss(p, &label, kind, cfg)?);
    let mut components = serde_json::Map::new();
    components.insert("dice".into(), json!(scalar(soft_dice_loss(p, &label, cfg.epsilon)?)));
    if kind != LossKind::Dice {
        components.insert(kind.name().into(), json!(scalar(eval_loss(kind, p, &label, cfg)?)));
    }
    let out = json!({
        "selector": kind,
        "loss": total,
        "components": components,
        "weights": { "dice": cfg.mix_dice_weight, "studied": cfg.mix_studied_weight },
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn write_field_with_manifest(
    settings: &Settings,
    field: &ScalarField,
    input: &Path,
    output: &Path,
) -> Result<u8> {
    save_field(field, output)?;
    let outcome = FileOutcome::ok(
        file_name(input),
        json!({ "output": output.display().to_string(), "min": field.min(), "max": field.max() }),
    );
    RunManifest::new(settings, vec![outcome]).write(&beside(output))?;
    Ok(0)
}

pub fn skeletonize(settings: &Settings, input: &Path, output: &Path) -> Result<u8> {
    let field = load_field(input)?;
    let tape = Tape::new();
    let skel = soft_skeleton(tape.constant(field), &settings.loss.skeleton())?
        .value()
        .clone();
    write_field_with_manifest(settings, &skel, input, output)
}

pub fn diffuse(settings: &Settings, input: &Path, output: &Path) -> Result<u8> {
    let field = load_field(input)?;
    let tape = Tape::new();
    let dif = smooth_diffuse(tape.constant(field), &settings.loss.diffusion())?
        .value()
        .clone();
    write_field_with_manifest(settings, &dif, input, output)
}

fn list_masks(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "pgm")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn deform_one(settings: &Settings, path: &Path, seed: u64) -> Result<(BinaryMask, serde_json::Value)> {
    let label = load_mask(path, DEFAULT_THRESHOLD)?;
    let cfg = skil_core::deform::DeformConfig {
        seed,
        ..settings.deform
    };
    Ok(match cfg.kind {
        DeformKind::Combined => {
            let (mask, trace) = deform_combined_traced(&label, &cfg)?;
            let [shift, width, branch] = trace.fired;
            let detail = json!({
                "fired": { "shift": shift, "width": width, "branch": branch },
                "sub_seeds": trace.sub_seeds,
            });
            (mask, detail)
        }
        DeformKind::Shift => {
            let (dx, dy) = draw_shift(cfg.shift_max, seed);
            (deform(&label, &cfg)?, json!({ "dx": dx, "dy": dy }))
        }
        _ => (deform(&label, &cfg)?, serde_json::Value::Null),
    })
}

pub fn deform_dir(settings: &Settings, in_dir: &Path, out_dir: &Path) -> Result<u8> {
    let inputs = list_masks(in_dir)?;
    if inputs.is_empty() {
        bail!("no PNG or PGM masks in {}", in_dir.display());
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let global = settings.deform.seed;
    let results: Vec<_> = inputs
        .par_iter()
        .map(|path| {
            let name = file_name(path);
            let seed = image_seed(global, &name);
            (name, seed, deform_one(settings, path, seed))
        })
        .collect();

    let mut code = 0;
    let mut outcomes = Vec::with_capacity(results.len());
    for (name, seed, result) in results {
        let outcome = match result.and_then(|(mask, detail)| {
            save_mask(&mask, out_dir.join(&name))?;
            Ok(detail)
        }) {
            Ok(detail) => FileOutcome::ok(&name, detail),
            Err(e) => {
                eprintln!("failed: {name}: {e:#}");
                if code == 0 {
                    code = crate::exit_code(&e);
                }
                FileOutcome::failed(&name, format!("{e:#}"))
            }
        };
        outcomes.push(outcome.with_seed(seed));
    }
    RunManifest::new(settings, outcomes).write(&out_dir.join("manifest.json"))?;
    Ok(code)
}

/// Distinct prediction values spread evenly over (0.05, 0.95) in seeded
/// random order, with a Bernoulli(0.3) label.
fn gradcheck_instance(seed: u64, n: usize) -> (ScalarField, BinaryMask) {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..n * n)
        .map(|k| 0.05 + 0.9 * (k as f64 + 0.5) / (n * n) as f64)
        .collect();
    values.shuffle(&mut rng);
    let pred = ScalarField::new(n, n, values).expect("n * n values");
    let label = BinaryMask::from_fn(n, n, |_, _| rng.gen_bool(0.3));
    (pred, label)
}

pub fn gradcheck(settings: &Settings, name: &str, size: usize, seeds: u64, h: f64) -> Result<u8> {
    let kind = selector(name)?;
    if size == 0 || size > MAX_GRADCHECK_SIZE {
        bail!(UsageError(format!("size must be in 1..={MAX_GRADCHECK_SIZE}")));
    }
    if !(h.is_finite() && h > 0.0) {
        bail!(UsageError("h must be positive".into()));
    }
    let cfg = &settings.loss;
    let base = settings.deform.seed;
    let mut failed = 0;
    for k in 0..seeds {
        let (pred, label) = gradcheck_instance(base.wrapping_add(k), size);
        let tape = Tape::new();
        let x = tape.leaf(pred.clone());
        let analytic = eval_loss(kind, x, &label, cfg)?
            .backward()?
            .get(x)
            .expect("prediction is a leaf")
            .clone();
        let numeric = central_differences(
            |p| {
                let t = Tape::new();
                Ok(eval_loss(kind, t.leaf(p.clone()), &label, cfg)?
                    .scalar()
                    .expect("losses are scalars"))
            },
            &pred,
            h,
        )?;
        let cmp = compare_gradients(&analytic, &numeric);
        let pass = cmp.max_rel_error <= GRADCHECK_TOLERANCE;
        failed += usize::from(!pass);
        println!(
            "seed {k}: max_rel_error {:.3e} max_abs_error {:.3e} {}",
            cmp.max_rel_error,
            cmp.max_abs_error,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if failed == 0 { 0 } else { 3 })
}

pub struct FitArgs<'a> {
    pub label: &'a Path,
    pub selector: &'a str,
    pub steps: usize,
    pub lr: f64,
    pub init: Option<&'a Path>,
    pub out: &'a Path,
    pub curve: Option<&'a Path>,
}

/// Logit of a prediction image, clamped away from 0 and 1.
fn logits_from(pred: &ScalarField) -> ScalarField {
    pred.map(|p| {
        let p = p.clamp(1e-3, 1.0 - 1e-3);
        (p / (1.0 - p)).ln()
    })
}

pub fn fit(settings: &Settings, args: FitArgs<'_>) -> Result<u8> {
    let kind = selector(args.selector)?;
    let label = load_mask(args.label, DEFAULT_THRESHOLD)?;
    let init = match args.init {
        Some(path) => logits_from(&load_field(path)?),
        None => ScalarField::zeros(label.height(), label.width()),
    };
    let outcome = fit_logits(&label, &init, kind, &settings.loss, args.steps, args.lr)?;
    save_field(&outcome.prediction, args.out)?;

    let curve = match args.curve {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
            args.out.with_file_name(format!("{stem}_loss.csv"))
        }
    };
    let mut text = String::from("step,loss\n");
    for (step, value) in outcome.losses.iter().enumerate() {
        text.push_str(&format!("{step},{value}\n"));
    }
    fs::write(&curve, text).with_context(|| format!("writing {}", curve.display()))?;

    let final_loss = *outcome.losses.last().expect("at least one step");
    let summary = json!({
        "selector": kind,
        "steps": args.steps,
        "lr": args.lr,
        "initial_loss": outcome.losses[0],
        "final_loss": final_loss,
        "prediction": args.out.display().to_string(),
        "curve": curve.display().to_string(),
    });
    RunManifest::new(settings, vec![FileOutcome::ok(file_name(args.label), summary.clone())])
        .write(&beside(args.out))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}
