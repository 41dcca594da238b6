use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tagtour_core::color_scheme::write_tag_sheet;
use tagtour_core::detector::{import_detections, read_detections_json, split_face_stem, write_detections_json, DetectionRecord, ImportFormat};
use tagtour_core::io::{config_hash, read_json, write_json};
use tagtour_core::metrics::{evaluate, EvalOptions};
use tagtour_core::pipeline::{detect_faces, eval_ground_truth, eval_readings, group_readings, run_property, PipelineConfig};
use tagtour_core::projection::{cubemap_to_equirect, equirect_to_cubemap, load_face_set, save_face_set};
use tagtour_core::raster::{image_dimensions, RasterImage};
use tagtour_core::recognizer::{classify_batch, ReadingRecord};
use tagtour_core::synth::{generate_dataset, DatasetConfig, GroundTruthFile};
use tagtour_core::tour::{build_tour, export_tour, panorama_key, PropertyManifest};

use crate::{
    BuildTourArgs, Command, ConfigArgs, DetectArgs, EvalArgs, GenTagsArgs, ImportKind, PipelineArgs, RecognizeArgs,
    SynthArgs, ToCubemapArgs, ToEquirectArgs,
};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenTags(a) => gen_tags(a),
        Command::ToCubemap(a) => to_cubemap(a),
        Command::ToEquirect(a) => to_equirect(a),
        Command::Detect(a) => detect(a),
        Command::Recognize(a) => recognize(a),
        Command::BuildTour(a) => build(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

/// 2 for filesystem failures, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<tagtour_core::Error>() {
            return if err.is_io() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(fs) = args.face_size {
        cfg.face_size = fs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_numbers(spec: &str) -> Result<Vec<u32>> {
    let mut out = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<u32>()?, b.trim().parse::<u32>()?),
            None => {
                let n = part.parse::<u32>()?;
                (n, n)
            }
        };
        if lo > hi {
            bail!("bad tag range `{part}`");
        }
        out.extend(lo..=hi);
    }
    if out.is_empty() {
        bail!("no tag numbers in `{spec}`");
    }
    Ok(out.into_iter().collect())
}

fn gen_tags(a: GenTagsArgs) -> Result<()> {
    let numbers = match &a.numbers {
        Some(s) => parse_numbers(s).with_context(|| format!("parsing --numbers {s}"))?,
        None => (1..=20).collect(),
    };
    let written = write_tag_sheet(&numbers, a.side, &a.out)?;
    log::info!("wrote {} tag images to {}", written.len(), a.out.display());
    Ok(())
}

fn file_stem(p: &Path) -> Result<String> {
    p.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .with_context(|| format!("no file name in {}", p.display()))
}

fn to_cubemap(a: ToCubemapArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let img = RasterImage::load_png(&a.input)?;
    let faces = equirect_to_cubemap(&img, cfg.face_size)?;
    save_face_set(&faces, &a.out, &file_stem(&a.input)?)?;
    Ok(())
}

fn to_equirect(a: ToEquirectArgs) -> Result<()> {
    let faces = load_face_set(&a.faces, &a.stem)?;
    cubemap_to_equirect(&faces, a.width, a.height)?.save_png(&a.out)?;
    Ok(())
}

/// Panorama stems with at least one `<stem>_<face>.png` in `dir`, sorted.
fn face_stems(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| tagtour_core::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut stems = BTreeSet::new();
    for e in entries.filter_map(|e| e.ok()) {
        let p = e.path();
        if p.extension().is_some_and(|x| x == "png") {
            if let Some((stem, _)) = p.file_stem().and_then(|s| s.to_str()).and_then(split_face_stem) {
                stems.insert(stem.to_string());
            }
        }
    }
    if stems.is_empty() {
        bail!("no <image>_<face>.png files in {}", dir.display());
    }
    Ok(stems.into_iter().collect())
}

fn image_id(property: Option<&str>, stem: &str) -> String {
    match property {
        Some(p) => format!("{p}/{stem}"),
        None => stem.to_string(),
    }
}

fn detect(a: DetectArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let property = a.property.as_deref();
    let mut records = Vec::new();
    if let Some(path) = &a.import {
        let format = match a.import_format {
            ImportKind::Yolo => ImportFormat::YoloTxt,
            ImportKind::Json => ImportFormat::Json,
        };
        for (image, dets) in import_detections(path, format, cfg.face_size)? {
            let id = image_id(property, &image);
            records.extend(dets.iter().map(|d| DetectionRecord::new(&id, d)));
        }
    } else {
        for stem in face_stems(&a.faces)? {
            let faces = load_face_set(&a.faces, &stem)?;
            let id = image_id(property, &stem);
            records.extend(detect_faces(&faces, &cfg.detector).iter().map(|d| DetectionRecord::new(&id, d)));
        }
    }
    log::info!("{} detections", records.len());
    write_detections_json(&records, &a.out)?;
    Ok(())
}

fn recognize(a: RecognizeArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let dets = read_detections_json(&a.detections)?;
    let mut images: Vec<&str> = Vec::new();
    for d in &dets {
        if !images.contains(&d.image.as_str()) {
            images.push(&d.image);
        }
    }
    let mut out: Vec<Option<ReadingRecord>> = vec![None; dets.len()];
    for image in images {
        let faces = load_face_set(&a.faces, panorama_key(image))?;
        let idx: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].image == image).collect();
        let batch: Vec<_> = idx.iter().map(|&i| dets[i].detection()).collect();
        for (i, r) in idx.into_iter().zip(classify_batch(&faces, &batch, &cfg.recognizer)) {
            out[i] = Some(ReadingRecord::new(image, &r));
        }
    }
    let readings: Vec<ReadingRecord> = out.into_iter().flatten().collect();
    write_json(&readings, &a.out)?;
    Ok(())
}

fn manifest_for(dir: &Path, manifest: Option<&PathBuf>) -> Result<PropertyManifest> {
    Ok(match manifest {
        Some(p) => PropertyManifest::load(p)?,
        None => PropertyManifest::from_dir(dir)?,
    })
}

fn build(a: BuildTourArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let readings: Vec<ReadingRecord> = read_json(&a.readings)?;
    let manifest = manifest_for(&a.panos, a.manifest.as_ref())?;
    let panoramas = manifest.records(|f| image_dimensions(&a.panos.join(f)))?;
    let tour = build_tour(&manifest.property_id, &panoramas, &group_readings(&readings), cfg.face_size)?;
    for w in &tour.warnings {
        log::warn!("{w}");
    }
    export_tour(&tour, &a.out)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: DatasetConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => DatasetConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_properties {
        cfg.n_properties = n;
    }
    let gt = generate_dataset(&cfg, &a.out)?;
    log::info!("{} labels written to {}", gt.labels.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let gt = GroundTruthFile::load(&a.gt)?;
    let mut readings: Vec<ReadingRecord> = Vec::new();
    for p in &a.pred {
        let mut part: Vec<ReadingRecord> = read_json(p)?;
        readings.append(&mut part);
    }
    let opts = EvalOptions {
        iou: a.iou,
        coco_range: a.coco_range,
        per_property: a.per_property,
    };
    if !(opts.iou > 0.0 && opts.iou <= 1.0) {
        bail!("--iou must be in (0, 1], got {}", opts.iou);
    }
    let mut report = evaluate(&eval_readings(&readings), &eval_ground_truth(&gt.labels), &opts);
    report.metadata.dataset_hash = Some(gt.config_hash.clone());
    report.metadata.config_hash = Some(config_hash(&opts));
    let e = &report.end_to_end;
    eprintln!(
        "end-to-end: TP {} FP {} FN {}  P {:.4} R {:.4} f1 {:.4} mAP@{} {}",
        e.tp,
        e.fp,
        e.fn_,
        e.precision,
        e.recall,
        e.f1,
        opts.iou,
        e.map.map_or("n/a".to_string(), |m| format!("{m:.4}"))
    );
    if let Some(p) = report.property_accuracy {
        eprintln!("property accuracy: {p:.4}");
    }
    write_json(&report, &a.out)?;
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let manifest = manifest_for(&a.input, a.manifest.as_ref())?;
    let (tour, readings) = run_property(&a.input, &manifest, &cfg)?;
    for w in &tour.warnings {
        log::warn!("{w}");
    }
    export_tour(&tour, &a.out.join("tour.json"))?;
    write_json(&readings, &a.out.join("readings.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_ranges() {
        assert_eq!(parse_numbers("1-3, 9,2").unwrap(), vec![1, 2, 3, 9]);
        assert_eq!(parse_numbers("20").unwrap(), vec![20]);
        assert!(parse_numbers("4-1").is_err());
        assert!(parse_numbers("x").is_err());
        assert!(parse_numbers(" , ").is_err());
    }

    #[test]
    fn io_failures_exit_with_two() {
        let io = tagtour_core::Error::Io {
            path: "a".into(),
            source: std::io::Error::other("gone"),
        };
        assert_eq!(exit_code(&anyhow::Error::new(io).context("loading")), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("bad flag")), 1);
        assert_eq!(exit_code(&anyhow::Error::new(tagtour_core::Error::InvalidConfig("x".into()))), 1);
    }

    #[test]
    fn image_ids() {
        assert_eq!(image_id(Some("p"), "pano_01"), "p/pano_01");
        assert_eq!(image_id(None, "pano_01"), "pano_01");
    }
}
