use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{debug, info, warn};

use hwpgo_core::annotate;
use hwpgo_core::count::SaturationLog;
use hwpgo_core::formats::{
    emit_annotated_cfgs, emit_binary_desc, emit_cfgs, emit_profile, emit_samples,
    emit_truth_with_cfgs, parse_binary_desc, parse_cfgs, parse_profile, parse_samples, Mode,
};
use hwpgo_core::pipeline::convert as run_convert;
use hwpgo_core::profile::{merge_logged, summarize, SourceProfile};
use hwpgo_core::simulate::{
    gen_program, ground_truth, run_trace, sample_cycles, sample_lbr, ProgramShape, SamplerConfig,
};

use crate::output::{read, write_atomic};
use crate::SimulateArgs;

fn in_file<T, E: std::error::Error + Send + Sync + 'static>(
    path: &Path,
    parsed: std::result::Result<T, E>,
) -> Result<T> {
    parsed.with_context(|| format!("{}", path.display()))
}

pub fn convert(samples: &Path, binary: &Path, mode: Option<Mode>, out: &Path) -> Result<()> {
    let sample_text = read(samples)?;
    let bd = in_file(binary, parse_binary_desc(&read(binary)?))?;

    if sample_text
        .lines()
        .all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
    {
        warn!(
            "{}: no samples; writing an empty profile",
            samples.display()
        );
        write_atomic(out, &emit_profile(&SourceProfile::new()))?;
        print!("{}", summarize(&SourceProfile::new(), 10).with_dropped(0));
        return Ok(());
    }
    let set = in_file(samples, parse_samples(&sample_text))?;
    if let Some(expected) = mode {
        if expected != set.mode {
            bail!(
                "{}: expected a {expected} sample file, found {}",
                samples.display(),
                set.mode
            );
        }
    }
    if set.is_empty() {
        warn!(
            "{}: no samples; writing an empty profile",
            samples.display()
        );
    }
    info!(
        "{} {} samples, period {}",
        set.total_samples(),
        set.mode,
        set.period
    );

    let conversion = run_convert(&set, &bd);
    let stats = conversion.stats;
    if stats.dropped_samples > 0 {
        warn!(
            "dropped {} {}",
            stats.dropped_samples,
            match stats.mode {
                Mode::Cycles => "samples outside every function",
                Mode::Lbr => "malformed branch ranges",
            }
        );
    }
    if stats.unresolved_frames > 0 {
        warn!(
            "{} inline stacks could not be placed (unknown inlined function); counted in the caller's body",
            stats.unresolved_frames
        );
    }
    if stats.saturations > 0 {
        warn!("{} counters saturated", stats.saturations);
    }
    write_atomic(out, &emit_profile(&conversion.profile))?;
    print!(
        "{}",
        summarize(&conversion.profile, 10).with_dropped(stats.dropped_samples)
    );
    Ok(())
}

pub fn merge(paths: &[PathBuf], out: &Path) -> Result<()> {
    let mut log = SaturationLog::default();
    let mut merged = SourceProfile::new();
    for path in paths {
        let profile = in_file(path, parse_profile(&read(path)?))?;
        debug!("{}: {} functions", path.display(), profile.functions.len());
        merged = merge_logged(&merged, &profile, &mut log);
    }
    if log.events > 0 {
        warn!("{} counters saturated while merging", log.events);
    }
    write_atomic(out, &emit_profile(&merged))
}

pub fn annotate(cfg: &Path, profile: &Path, out: &Path) -> Result<()> {
    let cfgs = in_file(cfg, parse_cfgs(&read(cfg)?))?;
    let profile_data = in_file(profile, parse_profile(&read(profile)?))?;
    let mut annotated = Vec::with_capacity(cfgs.len());
    for g in cfgs {
        if profile_data.get(&g.function).is_none() {
            warn!(
                "{}: no profile for `{}`; annotating zeros",
                profile.display(),
                g.function
            );
        }
        let ep = annotate::annotate(&g, &profile_data);
        if ep.inconsistencies > 0 {
            warn!(
                "{}: {} inconsistencies in the block counts",
                g.function, ep.inconsistencies
            );
        }
        if ep.unresolved > 0 {
            info!("{}: {} edges unresolved", g.function, ep.unresolved);
        }
        annotated.push((g, ep));
    }
    write_atomic(out, &emit_annotated_cfgs(&annotated))
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if !(0.0..1.0).contains(&args.jitter) {
        bail!("--jitter must be in [0, 1)");
    }
    let shape = ProgramShape::new(args.size as usize).with_iterations(args.iterations);
    let program = gen_program(args.seed, shape)?;
    let trace = run_trace(&program, args.seed, args.max_insns);
    if !trace.completed {
        warn!("trace stopped at {} instructions", trace.addrs.len());
    }
    let config = SamplerConfig::new(
        args.period.unwrap_or(args.mode.default_period()),
        args.jitter,
        args.seed,
    );
    let samples = match args.mode {
        Mode::Cycles => sample_cycles(&trace, config)?,
        Mode::Lbr => sample_lbr(&trace, config, args.depth as usize)?,
    };
    let truth = ground_truth(&program, &trace);
    info!(
        "{} instructions, {} taken branches, {} samples",
        trace.addrs.len(),
        trace.branches.len(),
        samples.total_samples()
    );

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let files = [
        ("binary.txt", emit_binary_desc(&program.binary)),
        ("cfg.txt", emit_cfgs(&program.cfgs)),
        ("samples.txt", emit_samples(&samples)),
        ("truth.txt", emit_truth_with_cfgs(&truth, &program.cfgs)),
    ];
    for (name, text) in &files {
        write_atomic(&args.out.join(name), text)?;
    }
    Ok(())
}

pub fn summary(path: &Path, top: usize) -> Result<()> {
    let profile = in_file(path, parse_profile(&read(path)?))?;
    print!("{}", summarize(&profile, top));
    Ok(())
}
