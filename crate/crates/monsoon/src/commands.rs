//! The five subcommands. Each reads the inputs named by a [`RunConfig`],
//! writes its outputs into `out_dir` and returns a printable summary.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};

use monsoon_core::baselines::{
    self, adjusted_rand_index, evaluate_daily_clustering, evaluate_temporal_clustering, Affinity, EvalReport,
};
use monsoon_core::grid::classify_years;
use monsoon_core::patterns::{self, CanonicalPatternSet};
use monsoon_core::sampler::{self, self_transition_count};
use monsoon_core::spells::{self, SpellSet, Threshold, WetDrySpells};
use monsoon_core::transitions::{self, TransitionModel};
use monsoon_core::{synth, CalendarIndex, LatentState, Matrix, RainfallField};

use crate::config::RunConfig;
use crate::io::{self, to_date, Output};

pub const RAINFALL: &str = "rainfall.csv";
pub const GEOMETRY: &str = "geometry.csv";
pub const TRUTH: &str = "truth.csv";
pub const TRANSITIONS: &str = "transitions.csv";

/// What a command wrote, plus headline numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub files: Vec<PathBuf>,
    pub entries: Vec<(String, String)>,
}

impl Summary {
    fn add(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }
}

fn load_field(config: &RunConfig) -> Result<io::LoadedField> {
    let data = config.input(&config.data, "data", RAINFALL)?;
    let geometry = config.input(&config.geometry, "geometry", GEOMETRY)?;
    Ok(io::load_rainfall(&data, &geometry, config.grid_spacing)?)
}

fn date(cal: &CalendarIndex, t: usize) -> String {
    to_date(cal.day(t)).to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |v| v.to_string())
}

fn fmt_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| (l + 1).to_string()).collect::<Vec<_>>().join("-")
}

/// Synthetic rainfall, geometry and planted labels.
pub fn cmd_synth(config: &RunConfig) -> Result<Summary> {
    let spec = config.synth_spec()?;
    let data = synth::generate(&spec)?;
    let out = Output::new(&config.out_dir, config.hash())?;
    let field = &data.field;
    let truth = LatentState { z: data.z.clone(), u: data.u.clone(), v: data.v.clone() };
    let mut summary = Summary::default();
    summary.files.push(io::write_rainfall(&out, RAINFALL, field)?);
    summary.files.push(io::write_geometry(&out, GEOMETRY, field.geometry())?);
    summary.files.push(io::write_truth(&out, TRUTH, field.calendar(), &truth)?);
    summary.add("locations", field.n_locations());
    summary.add("days", field.n_days());
    summary.add("rainfall_rows", field.n_locations() * field.n_days());
    summary.add("patterns", spec.n_patterns);
    summary.add("wet_fraction", data.z.as_slice().iter().map(|&b| f64::from(b)).sum::<f64>() / data.z.as_slice().len() as f64);
    Ok(summary)
}

/// Gibbs fit: MAP state, prototypes, per-sweep diagnostics and patterns.
pub fn cmd_fit(config: &RunConfig) -> Result<Summary> {
    let loaded = load_field(config)?;
    let field = &loaded.field;
    let cal = field.calendar();
    let params = config.model_params(&field.daily_aggregate())?;
    let result = sampler::run(field, &params, &config.sampler_config()?)?;
    let state = &result.map_state;
    let out = Output::new(&config.out_dir, config.hash())?;
    let mut summary = Summary::default();

    io::write_state(&out, cal, state)?;
    summary.files.extend([io::STATE_Z, io::STATE_U, io::STATE_V].map(|n| out.path(n)));

    let rows = result.trace.iter().map(|s| {
        [s.sweep.to_string(), s.log_density.to_string(), s.changed_z.to_string(), s.changed_u.to_string(), s.changed_v.to_string()]
    });
    summary.files.push(out.csv("diagnostics.csv", &["sweep", "log_density", "changed_z", "changed_u", "changed_v"], rows)?);

    let proto = &result.map_prototypes;
    let rows = (0..proto.pi.rows()).flat_map(|k| {
        (0..proto.pi.cols()).map(move |s| [(k + 1).to_string(), s.to_string(), proto.pi.get(k, s).to_string()])
    });
    summary.files.push(out.csv("prototypes_u.csv", &["label", "location_id", "pi"], rows)?);
    let rows = (0..proto.tau.rows()).flat_map(|k| {
        (0..proto.tau.cols()).map(move |t| [(k + 1).to_string(), date(cal, t), proto.tau.get(k, t).to_string()])
    });
    summary.files.push(out.csv("prototypes_v.csv", &["label", "date", "tau"], rows)?);

    let spatial = patterns::extract_spatial(field, state);
    let rows = spatial.labels.iter().enumerate().flat_map(|(pos, &l)| {
        let spatial = &spatial;
        (0..field.n_locations())
            .map(move |s| [(l + 1).to_string(), s.to_string(), spatial.crp[pos][s].to_string(), spatial.cdp[pos][s].to_string()])
    });
    summary.files.push(out.csv(io::PATTERNS, &["label", "location_id", "crp_value", "cdp_value"], rows)?);

    let temporal = patterns::extract_temporal(field, state);
    let rows = temporal.labels.iter().enumerate().flat_map(|(pos, &l)| {
        let temporal = &temporal;
        (0..field.n_days())
            .map(move |t| [(l + 1).to_string(), date(cal, t), temporal.cts[pos][t].to_string(), temporal.cds[pos][t].to_string()])
    });
    summary.files.push(out.csv("temporal_patterns.csv", &["label", "date", "cts_value", "cds_value"], rows)?);

    let mut report = Summary::default();
    report.add("locations", field.n_locations());
    report.add("days", field.n_days());
    report.add("skipped_rows", loaded.skipped_rows);
    report.add("aggregate_sigma", params.aggregate_sigma);
    report.add("sweeps", result.trace.len());
    report.add("map_sweep", result.map_sweep);
    report.add("map_log_density", result.map_log_density);
    report.add("final_log_density", result.final_log_density);
    report.add("day_clusters", spatial.len());
    report.add("location_clusters", temporal.len());
    report.add("self_transitions", self_transition_count(&state.u, cal, false));
    summary.files.push(out.report("fit_report.txt", &report.entries)?);

    ensure!(io::read_state(out.dir(), field)? == *state, "written state does not read back identically");
    summary.entries = report.entries;
    Ok(summary)
}

fn spell_rows(rows: &mut Vec<[String; 6]>, cal: &CalendarIndex, scale: &str, id: &str, set: &SpellSet) {
    for sp in &set.spells {
        rows.push([scale.into(), id.into(), set.kind.as_str().into(), date(cal, sp.start), date(cal, sp.end), sp.len().to_string()]);
    }
}

fn wet_dry_rows(rows: &mut Vec<[String; 6]>, cal: &CalendarIndex, scale: &str, id: &str, spells: &WetDrySpells) {
    spell_rows(rows, cal, scale, id, &spells.wet);
    spell_rows(rows, cal, scale, id, &spells.dry);
}

/// Prominence and family tags on the extracted day patterns.
fn tagged_patterns(config: &RunConfig, field: &RainfallField, state: &LatentState) -> Result<(CanonicalPatternSet, bool)> {
    let cal = field.calendar();
    let mut set = patterns::extract_spatial(field, state);
    let min_years = config.prominence_rule()?.min_years(cal.n_years());
    patterns::prominence(&mut set, cal, min_years)?;
    let rule = config.family_rule()?;
    let n_loc = field.n_locations();
    let masks = match (&config.monsoon_mask, &config.north_mask) {
        (Some(m), Some(n)) => Some((io::read_mask(m, n_loc)?, io::read_mask(n, n_loc)?)),
        (None, None) => None,
        _ => bail!("monsoon_mask and north_mask must be given together"),
    };
    let assigned = match &masks {
        Some((m, n)) => {
            patterns::assign_families(&mut set, Some(m), Some(n), &rule)?;
            true
        }
        None => false,
    };
    Ok((set, assigned))
}

/// Transition, spell, similarity and year-class artifacts of a fitted run.
pub fn cmd_analyze(config: &RunConfig) -> Result<Summary> {
    let loaded = load_field(config)?;
    let field = &loaded.field;
    let cal = field.calendar();
    let state = io::read_state(&config.out_dir, field).context("reading fit outputs (run `fit` first)")?;
    let out = Output::new(&config.out_dir, config.hash())?;
    let mut summary = Summary::default();
    let mut report = Summary::default();

    let (set, families_assigned) = tagged_patterns(config, field, &state)?;
    let monthly = patterns::monthly_distribution(&set, cal);
    let rows = (0..set.len()).map(|pos| {
        [
            (set.labels[pos] + 1).to_string(),
            set.cluster_days[pos].len().to_string(),
            set.mu_k[pos].to_string(),
            set.wet_fraction[pos].to_string(),
            set.aggregate(pos).to_string(),
            set.order_rank(pos).to_string(),
            u8::from(set.prominent[pos]).to_string(),
            set.family[pos].map_or_else(String::new, |f| f.to_string()),
        ]
    });
    let header = ["label", "n_days", "mu_k", "wet_fraction", "crp_total", "order_rank", "prominent", "family"];
    summary.files.push(out.csv("pattern_catalog.csv", &header, rows)?);
    let rows = (0..set.len()).map(|pos| {
        let m = monthly[pos];
        [(set.labels[pos] + 1).to_string(), m[0].to_string(), m[1].to_string(), m[2].to_string(), m[3].to_string()]
    });
    summary.files.push(out.csv("monthly.csv", &["label", "jun", "jul", "aug", "sep"], rows)?);
    report.add("patterns", set.len());
    report.add("prominent_patterns", set.prominent_labels().len());
    report.add("families_assigned", families_assigned);

    // transitions among prominent patterns, or all patterns when none is prominent
    let prominent = set.prominent_labels();
    let transition_labels = if prominent.is_empty() { set.labels.clone() } else { prominent };
    report.add("transition_labels", if set.prominent_labels().is_empty() { "all" } else { "prominent" });
    let mut model = transitions::estimate_transitions(&state.u, cal, &transition_labels, config.include_cross_season)?;
    let families: Vec<Option<u8>> =
        model.labels.iter().map(|&l| set.position(l).and_then(|p| set.family[p])).collect();
    model.set_family_order(&families);
    let (zero_diag, by_family) = transitions::views(&model);
    summary.files.push(io::write_label_matrix(&out, TRANSITIONS, &model.labels, &model.matrix)?);
    summary.files.push(io::write_label_matrix(&out, "transitions_zero_diag.csv", &model.labels, &zero_diag)?);
    let family_labels: Vec<usize> = model.family_order.iter().map(|&p| model.labels[p]).collect();
    summary.files.push(io::write_label_matrix(&out, "transitions_by_family.csv", &family_labels, &by_family)?);
    let counts = model.counts.map(|c| c as f64);
    summary.files.push(io::write_label_matrix(&out, "transition_counts.csv", &model.labels, &counts)?);
    let stationary = model.stationary();
    report.add("empty_transition_rows", model.empty_rows.iter().filter(|&&e| e).count());
    report.add(
        "stationary",
        stationary.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
    );

    let subseq = transitions::frequent_ksubseq(&state.u, cal, config.subseq_k, Some(config.subseq_top))?;
    let rows = subseq.iter().map(|(seq, n)| [fmt_labels(seq), n.to_string()]);
    summary.files.push(out.csv("subsequences.csv", &["seq", "count"], rows)?);

    let pstats = transitions::pattern_spell_stats(&state.u, cal, &set.labels);
    let rows = (0..pstats.labels.len()).map(|i| {
        [
            (pstats.labels[i] + 1).to_string(),
            pstats.mean_length[i].to_string(),
            pstats.mean_spells_per_season[i].to_string(),
        ]
    });
    summary.files.push(out.csv("pattern_spells.csv", &["label", "mean_length", "mean_spells_per_season"], rows)?);

    // all-India active/break spells by both definitions
    let y = field.daily_aggregate();
    let act0 = spells::act_brk_threshold(&y, cal, config.min_run);
    let means: Vec<(usize, f64)> =
        (0..set.len()).filter(|&p| set.prominent[p]).map(|p| (set.labels[p], set.mu_k[p])).collect();
    let act1 = spells::act_brk_cluster(&state.u, &means, &y, cal, config.min_run);
    for (a, b) in [(&act0.active, &act0.brk), (&act1.active, &act1.brk)] {
        ensure!(a.days.iter().all(|&t| !b.contains(t)), "active and break day sets overlap");
    }
    let rows = (0..field.n_days()).map(|t| {
        let flag = |s: &SpellSet| u8::from(s.contains(t)).to_string();
        [date(cal, t), y[t].to_string(), flag(&act0.active), flag(&act0.brk), flag(&act1.active), flag(&act1.brk)]
    });
    summary.files.push(out.csv("active_break_days.csv", &["date", "aggregate", "act_0", "brk_0", "act_1", "brk_1"], rows)?);

    let mut spell_table = Vec::new();
    spell_rows(&mut spell_table, cal, "all_india", "0", &act0.active);
    spell_rows(&mut spell_table, cal, "all_india", "0", &act0.brk);
    spell_rows(&mut spell_table, cal, "all_india", "1", &act1.active);
    spell_rows(&mut spell_table, cal, "all_india", "1", &act1.brk);
    let temporal = patterns::extract_temporal(field, &state);
    for (label, sp) in temporal.labels.iter().zip(spells::regional_spells(&temporal, cal, config.span_seasons)) {
        wet_dry_rows(&mut spell_table, cal, "region", &(label + 1).to_string(), &sp);
    }
    let local = spells::local_spells(&state.z, cal, 1, config.span_seasons);
    for (s, sp) in local.iter().enumerate() {
        wet_dry_rows(&mut spell_table, cal, "grid", &s.to_string(), sp);
    }
    let header = ["scale", "id", "kind", "start_date", "end_date", "length"];
    summary.files.push(out.csv("spells.csv", &header, spell_table)?);

    let rows = local.iter().enumerate().map(|(s, sp)| [s.to_string(), opt(sp.wet.mean_length()), opt(sp.dry.mean_length())]);
    summary.files.push(out.csv("local_spell_lengths.csv", &["location_id", "mean_wet_length", "mean_dry_length"], rows)?);

    let mut cmp = Summary::default();
    cmp.add("mu_y", act0.mu);
    cmp.add("sigma_y", act0.sigma);
    cmp.add("active_clusters", fmt_labels(&act1.active_clusters));
    cmp.add("break_clusters", fmt_labels(&act1.break_clusters));
    for (name, a, b) in [("act", &act0.active, &act1.active), ("brk", &act0.brk, &act1.brk)] {
        let c = spells::compare_spells(a, b, field)?;
        cmp.add(&format!("{name}_0_days"), c.size_a);
        cmp.add(&format!("{name}_1_days"), c.size_b);
        cmp.add(&format!("{name}_intersection"), c.intersection);
        cmp.add(&format!("{name}_0_mean_rain"), opt(c.mean_rain_a));
        cmp.add(&format!("{name}_1_mean_rain"), opt(c.mean_rain_b));
        cmp.add(&format!("{name}_0_mean_above_local_mean"), opt(c.above_mean_a));
        cmp.add(&format!("{name}_1_mean_above_local_mean"), opt(c.above_mean_b));
        cmp.add(&format!("{name}_0_spells"), c.spells_a);
        cmp.add(&format!("{name}_1_spells"), c.spells_b);
        cmp.add(&format!("{name}_0_mean_length"), opt(c.mean_length_a));
        cmp.add(&format!("{name}_1_mean_length"), opt(c.mean_length_b));
    }
    let fitted = spells::coherence_stats(&state.z, field.geometry(), cal);
    let baseline = spells::coherence_stats(&spells::threshold_discretize(field, Threshold::LocalMean)?, field.geometry(), cal);
    cmp.add("neighbor_agreement", opt(fitted.neighbor_agreement));
    cmp.add("day_persistence", opt(fitted.day_persistence));
    cmp.add("threshold_neighbor_agreement", opt(baseline.neighbor_agreement));
    cmp.add("threshold_day_persistence", opt(baseline.day_persistence));
    summary.files.push(out.report("spell_comparison.txt", &cmp.entries)?);

    let sim = baselines::hamming_similarity_series(field, &state.z, &state.u, &set)?;
    let rows = (0..field.n_days()).map(|t| [date(cal, t), sim.per_day[t].to_string(), y[t].to_string()]);
    summary.files.push(out.csv("similarity.csv", &["date", "similarity", "aggregate"], rows)?);
    let classes = classify_years(field)?;
    let per_year: BTreeMap<i32, f64> = sim.per_year.iter().copied().collect();
    let rows = classes.iter().map(|(year, total, class)| {
        [year.to_string(), total.to_string(), class.as_str().to_string(), opt(per_year.get(year).copied())]
    });
    summary.files.push(out.csv("years.csv", &["year", "total", "class", "mean_similarity"], rows)?);
    report.add("mean_similarity", sim.mean);
    report.add("similarity_aggregate_correlation", opt(sim.correlation_with_aggregate));
    report.add("act_0_days", act0.active.days.len());
    report.add("act_1_days", act1.active.days.len());
    report.add("brk_0_days", act0.brk.days.len());
    report.add("brk_1_days", act1.brk.days.len());
    summary.files.push(out.report("analysis_report.txt", &report.entries)?);

    io::read_transitions(&out.path(TRANSITIONS)).context("validating the written transition matrix")?;
    summary.entries = report.entries;
    Ok(summary)
}

/// Seasons simulated from a transition matrix and the patterns' CRPs,
/// starting from the chain's stationary distribution.
pub fn cmd_simulate(config: &RunConfig) -> Result<Summary> {
    let model: TransitionModel = io::read_transitions(&config.input(&config.transitions, "transitions", TRANSITIONS)?)?;
    let crps = io::read_crp(&config.input(&config.patterns, "patterns", io::PATTERNS)?)?;
    let crp: Vec<Vec<f64>> = model
        .labels
        .iter()
        .map(|l| crps.get(l).cloned().with_context(|| format!("pattern {} has no CRP in the patterns file", l + 1)))
        .collect::<Result<_>>()?;
    let initial = model.stationary();
    let seasons = transitions::simulate_seasons(&model, &crp, &initial, config.sim_length, config.sim_seasons, config.seed)?;
    let out = Output::new(&config.out_dir, config.hash())?;
    let mut summary = Summary::default();

    let rows = seasons.iter().enumerate().flat_map(|(i, season)| {
        season.labels.iter().enumerate().map(move |(t, &l)| {
            let total: f64 = (0..season.rain.rows()).map(|s| season.rain.get(s, t)).sum();
            [(i + 1).to_string(), (t + 1).to_string(), (l + 1).to_string(), total.to_string()]
        })
    });
    summary.files.push(out.csv("simulated_days.csv", &["season", "day", "label", "aggregate"], rows)?);
    let rows = seasons.iter().enumerate().flat_map(|(i, season)| {
        let rain = &season.rain;
        (0..rain.cols()).flat_map(move |t| {
            (0..rain.rows()).map(move |s| [(i + 1).to_string(), (t + 1).to_string(), s.to_string(), rain.get(s, t).to_string()])
        })
    });
    summary.files.push(out.csv("simulated_rain.csv", &["season", "day", "location_id", "rain_mm"], rows)?);

    let n_days = (config.sim_seasons * config.sim_length).max(1) as f64;
    let mut freq = vec![0.0; model.len()];
    for season in &seasons {
        for &l in &season.labels {
            freq[model.position(l).expect("simulated labels come from the model")] += 1.0 / n_days;
        }
    }
    summary.add("seasons", config.sim_seasons);
    summary.add("length", config.sim_length);
    summary.add("labels", fmt_labels(&model.labels));
    summary.add("stationary", initial.iter().map(f64::to_string).collect::<Vec<_>>().join(" "));
    summary.add("frequencies", freq.iter().map(f64::to_string).collect::<Vec<_>>().join(" "));
    summary.files.push(out.report("simulate_report.txt", &summary.entries)?);
    Ok(summary)
}

struct EvalRow {
    axis: &'static str,
    method: &'static str,
    k: usize,
    report: EvalReport,
    ari: Option<f64>,
}

fn distinct(labels: &[usize]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

/// Baselines against the fitted model on both axes.
pub fn cmd_evaluate(config: &RunConfig) -> Result<Summary> {
    let loaded = load_field(config)?;
    let field = &loaded.field;
    let state = io::read_state(&config.out_dir, field).context("reading fit outputs (run `fit` first)")?;
    let truth_path = config.truth.clone().unwrap_or_else(|| config.out_dir.join(TRUTH));
    let truth = if truth_path.is_file() { Some(io::read_truth_labels(&truth_path, field)?) } else { None };
    let thresholded = spells::threshold_discretize(field, Threshold::LocalMean)?;
    let x = field.x();
    let days: Vec<Vec<f64>> = x.column_vecs();
    let locations: Vec<Vec<f64>> = x.row_vecs();
    let binary = |m: &Matrix<u8>, by_col: bool| -> Vec<Vec<f64>> {
        let v = if by_col { m.column_vecs() } else { m.row_vecs() };
        v.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect()
    };
    let day_bits = binary(&thresholded, true);
    let loc_bits = binary(&thresholded, false);

    let mut rows: Vec<EvalRow> = Vec::new();
    let ari = |labels: &[usize], truth: Option<&Vec<usize>>| -> Result<Option<f64>> {
        truth.map(|t| adjusted_rand_index(labels, t)).transpose().map_err(Into::into)
    };
    for axis in ["days", "locations"] {
        let (items, bits, mrf_labels, truth_labels) = if axis == "days" {
            (&days, &day_bits, &state.u, truth.as_ref().map(|t| &t.0))
        } else {
            (&locations, &loc_bits, &state.v, truth.as_ref().map(|t| &t.1))
        };
        let metrics = |labels: &[usize], z: &Matrix<u8>| -> Result<EvalReport> {
            Ok(if axis == "days" {
                evaluate_daily_clustering(field, labels, z)?
            } else {
                evaluate_temporal_clustering(field, labels, z)?
            })
        };
        let mrf_k = distinct(mrf_labels);
        rows.push(EvalRow { axis, method: "mrf", k: mrf_k, report: metrics(mrf_labels, &state.z)?, ari: ari(mrf_labels, truth_labels)? });
        let ks = if config.baseline_ks.is_empty() { vec![mrf_k] } else { config.baseline_ks.clone() };
        for k in ks {
            ensure!(k >= 1 && k <= items.len(), "baseline k = {k} must lie in 1..={} for {axis}", items.len());
            let km = baselines::kmeans(items, k, config.seed, baselines::DEFAULT_MAX_ITER)?.clustering.labels;
            let euclid = baselines::spectral(items, k, Affinity::EuclidGaussian { bandwidth: None }, config.seed)?.clustering.labels;
            let hamm = baselines::spectral(bits, k, Affinity::HammingGaussian { bandwidth: None }, config.seed)?.clustering.labels;
            for (method, labels) in [("kmeans", km), ("spect_euclid", euclid), ("spect_hamming", hamm)] {
                rows.push(EvalRow { axis, method, k, report: metrics(&labels, &thresholded)?, ari: ari(&labels, truth_labels)? });
            }
        }
    }

    let out = Output::new(&config.out_dir, config.hash())?;
    let table = rows.iter().map(|r| {
        [
            r.axis.to_string(),
            r.method.to_string(),
            r.k.to_string(),
            r.report.std_yy.to_string(),
            r.report.l2_theta.to_string(),
            r.report.hamm_theta_d.to_string(),
            r.report.self_transitions.map_or_else(String::new, |n| n.to_string()),
            r.ari.map_or_else(String::new, |a| a.to_string()),
        ]
    });
    let header = ["axis", "method", "k", "std_yy", "l2_theta", "hamm_theta_d", "self_transitions", "ari_vs_truth"];
    let mut summary = Summary::default();
    summary.files.push(out.csv("evaluation.csv", &header, table)?);
    for r in &rows {
        let key = format!("{}.{}.k{}", r.axis, r.method, r.k);
        summary.add(&format!("{key}.l2_theta"), r.report.l2_theta);
        if let Some(a) = r.ari {
            summary.add(&format!("{key}.ari"), a);
        }
    }
    Ok(summary)
}
