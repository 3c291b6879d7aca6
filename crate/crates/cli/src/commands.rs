use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use ivkg_core::econ::report::render_table;
use ivkg_core::econ::{build_design, fit_2sls, PanelTable, RegressionSpec, Robust};
use ivkg_core::forest::{evaluate, train_forest, FeatureSubset, ForestParams};
use ivkg_core::graph::worked_example_graph;
use ivkg_core::miner::{
    compare_subgraphs, mine, quality_partition, read_triples_tsv, score_triples, summarize,
    write_triples_tsv,
};
use ivkg_core::synth::{
    brute_force_iv_oracle, gen_classification_corpus, gen_random_graph, gen_scm_panel,
    CorpusParams, GroupEffects, ScmParams,
};
use ivkg_core::textfeat::{
    build_feature_matrix, english_stopwords, read_corpus_dir, read_stopwords,
    split_train_validation, write_corpus_dir, ConceptList, FeatureMatrix,
};
use ivkg_core::{CausalGraph, Execution, ReachabilitySpec, TOOL_VERSION};
use serde::Serialize;

use crate::{
    ClassifyArgs, Cli, Command, CompareArgs, Failure, FeaturesArgs, Format, MineArgs, SynthKind,
    TslsArgs,
};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    if !cli.shared.weight_threshold.is_finite() {
        return Err(Failure::input("--weight-threshold must be finite"));
    }
    match &cli.command {
        Command::Mine(a) => cmd_mine(cli, a),
        Command::Compare(a) => cmd_compare(cli, a),
        Command::Features(a) => cmd_features(a),
        Command::Classify(a) => cmd_classify(cli, a),
        Command::Tsls(a) => cmd_tsls(cli, a),
        Command::Synth(a) => cmd_synth(cli, &a.kind),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool_version: &'a str,
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn to_json<T: Serialize>(body: &T) -> Result<String, Failure> {
    let env = Envelope {
        tool_version: TOOL_VERSION,
        format_version: crate::FORMAT_VERSION,
        body,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

fn with_path(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| with_path(path, e))
}

/// Writes to `path`, or standard output when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        Some(p) => write_file(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn create_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path).map_err(|e| with_path(path, e))
}

fn seed(cli: &Cli) -> u64 {
    cli.shared.seed.unwrap_or(0)
}

fn spec(cli: &Cli) -> Result<ReachabilitySpec, Failure> {
    Ok(ReachabilitySpec::new(
        cli.shared.hops,
        cli.shared.direction.into(),
    )?)
}

#[derive(Serialize)]
struct RunSettings {
    hops: usize,
    direction: ivkg_core::Direction,
    exclusion: ivkg_core::ExclusionMode,
    weight_threshold: f64,
}

#[derive(Serialize)]
struct StatsReport<'a> {
    settings: &'a RunSettings,
    stats: &'a ivkg_core::MiningStats,
}

#[derive(Serialize)]
struct QualityReport<'a> {
    settings: &'a RunSettings,
    n_triples: usize,
    quality: &'a ivkg_core::miner::QualityPartition,
}

#[derive(Serialize)]
struct MineReport<'a> {
    settings: &'a RunSettings,
    stats: &'a ivkg_core::MiningStats,
    quality: &'a ivkg_core::miner::QualityPartition,
    triples: &'a [ivkg_core::IvTriple],
}

fn cmd_mine(cli: &Cli, args: &MineArgs) -> Outcome {
    let g = CausalGraph::load_files(&args.nodes, &args.edges)?;
    let spec = spec(cli)?;
    let mode = cli.shared.exclusion.into();
    let threshold = cli.shared.weight_threshold;
    let exec = Execution::default();
    let triples = if args.oracle {
        let keys = brute_force_iv_oracle(&g, &spec, mode)?;
        score_triples(&g, &keys, &spec, threshold, exec)?
    } else {
        mine(&g, &spec, mode, threshold, exec)?
    };
    let stats = summarize(&triples, &g, &spec, exec)?;
    let quality = quality_partition(&triples);
    let settings = RunSettings {
        hops: spec.max_hops,
        direction: spec.direction,
        exclusion: mode,
        weight_threshold: threshold,
    };

    let mut tsv = Vec::new();
    write_triples_tsv(&g, &triples, &mut tsv)?;

    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write_file(&dir.join("triples.tsv"), &tsv)?;
        write_file(
            &dir.join("stats.json"),
            to_json(&StatsReport {
                settings: &settings,
                stats: &stats,
            })?
            .as_bytes(),
        )?;
        let q = QualityReport {
            settings: &settings,
            n_triples: triples.len(),
            quality: &quality,
        };
        return write_file(&dir.join("quality.json"), to_json(&q)?.as_bytes());
    }
    match cli.shared.format.unwrap_or(Format::Tsv) {
        Format::Tsv => emit(None, &tsv),
        Format::Json => {
            let r = MineReport {
                settings: &settings,
                stats: &stats,
                quality: &quality,
                triples: &triples,
            };
            emit(None, to_json(&r)?.as_bytes())
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "nodes (Z candidates)  {}", stats.n_nodes);
            let _ = writeln!(s, "Z->A pairs            {}", stats.n_za_pairs);
            let _ = writeln!(s, "Z->A->B triples       {}", stats.n_zab_triples);
            let _ = writeln!(
                s,
                "per Z triples         min {} mean {:.3} std {:.3} max {}",
                stats.per_z.min, stats.per_z.mean, stats.per_z.std, stats.per_z.max
            );
            let _ = writeln!(
                s,
                "quality low/mid/high  {}/{}/{}",
                quality.n_low, quality.n_middle, quality.n_high
            );
            let _ = writeln!(
                s,
                "edge-node Z           {} distinct, {} triples",
                quality.n_distinct_edge_node_z, quality.n_triples_with_edge_node_z
            );
            emit(None, s.as_bytes())
        }
    }
}

fn read_triples(path: &Path) -> Result<Vec<ivkg_core::IvTriple>, Failure> {
    let f = fs::File::open(path).map_err(|e| with_path(path, e))?;
    Ok(read_triples_tsv(
        std::io::BufReader::new(f),
        &path.display().to_string(),
    )?)
}

fn cmd_compare(cli: &Cli, args: &CompareArgs) -> Outcome {
    let report = compare_subgraphs(&read_triples(&args.left)?, &read_triples(&args.right)?);
    let bytes = match cli.shared.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Text | Format::Tsv => format!(
            "only in left\t{}\nonly in right\t{}\nshared\t{}\n",
            report.n_exclusive_left, report.n_exclusive_right, report.n_shared
        ),
    };
    emit(args.out.as_deref(), bytes.as_bytes())
}

fn cmd_features(args: &FeaturesArgs) -> Outcome {
    let concepts = match (&args.similarity, &args.nodes, &args.edges) {
        (Some(p), _, _) => {
            let f = fs::File::open(p).map_err(|e| with_path(p, e))?;
            ConceptList::from_similarity(f, args.similarity_threshold, &p.display().to_string())?
        }
        (None, Some(n), Some(e)) => {
            ConceptList::from_graph(&CausalGraph::load_files(n, e)?, !args.unweighted)?
        }
        _ => {
            return Err(Failure::input(
                "give --similarity or both --nodes and --edges",
            ))
        }
    };
    let stopwords = match &args.stopwords {
        Some(p) => read_stopwords(read_text(p)?.as_bytes())?,
        None => english_stopwords(),
    };
    let docs = read_corpus_dir(&args.corpus)?;
    let m = build_feature_matrix(&docs, &concepts, &stopwords, Execution::default())?;
    let mut out = Vec::new();
    m.write_csv(&mut out)?;
    emit(args.out.as_deref(), &out)
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    n_train: usize,
    n_validation: usize,
    train_fraction: f64,
    params: &'a ForestParams,
    metrics: &'a ivkg_core::forest::Metrics,
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> Outcome {
    let f = fs::File::open(&args.features).map_err(|e| with_path(&args.features, e))?;
    let m = FeatureMatrix::read_csv(
        std::io::BufReader::new(f),
        &args.features.display().to_string(),
    )?;
    if !m.is_labeled() {
        return Err(Failure::input(format!(
            "{}: matrix has no label column",
            args.features.display()
        )));
    }
    let params = ForestParams {
        n_trees: args.trees,
        max_depth: args.max_depth,
        min_samples_split: args.min_samples_split,
        features_per_split: args.max_features.parse::<FeatureSubset>()?,
        seed: seed(cli),
    };
    let (train, val) = split_train_validation(&m, args.train_fraction, seed(cli))?;
    if val.n_rows() == 0 {
        return Err(Failure::input(
            "validation split is empty; lower --train-fraction or add rows",
        ));
    }
    let exec = Execution::default();
    let model = train_forest(&train, &params, exec)?;
    let positive = args
        .positive_label
        .clone()
        .unwrap_or_else(|| model.class_labels[1].clone());
    let metrics = evaluate(&val.label_vec()?, &model.predict(&val)?, &positive)?;
    if let Some(p) = &args.model_out {
        let mut buf = Vec::new();
        model.to_json(&mut buf)?;
        buf.push(b'\n');
        write_file(p, &buf)?;
    }
    let report = ClassifyReport {
        n_train: train.n_rows(),
        n_validation: val.n_rows(),
        train_fraction: args.train_fraction,
        params: &params,
        metrics: &metrics,
    };
    emit(args.metrics_out.as_deref(), to_json(&report)?.as_bytes())
}

fn cmd_tsls(cli: &Cli, args: &TslsArgs) -> Outcome {
    let spec = match &args.spec {
        Some(p) => RegressionSpec::from_json(&read_text(p)?)?,
        None => RegressionSpec {
            outcome: args.outcome.clone().unwrap_or_default(),
            endogenous: args.endogenous.clone().unwrap_or_default(),
            instruments: args.instruments.clone(),
            controls: args.controls.clone(),
            fixed_effects: args.fixed_effects.clone(),
            robust: args.robust.parse::<Robust>()?,
        },
    };
    let panel = PanelTable::read_csv_file(&args.panel)?;
    let design = build_design(&panel, &spec)?;
    let result = fit_2sls(&design, spec.robust)?;
    let json = to_json(&result)?;
    let table = render_table(&result);
    if let Some(p) = &args.json_out {
        write_file(p, json.as_bytes())?;
    }
    if let Some(p) = &args.table_out {
        write_file(p, table.as_bytes())?;
    }
    if args.json_out.is_some() || args.table_out.is_some() {
        return Ok(());
    }
    match cli.shared.format.unwrap_or(Format::Text) {
        Format::Json => emit(None, json.as_bytes()),
        Format::Text => emit(None, table.as_bytes()),
        Format::Tsv => Err(Failure::input("tsls reports are json or text")),
    }
}

fn write_graph(g: &CausalGraph, dir: &Path) -> Outcome {
    create_dir(dir)?;
    let (mut nodes, mut edges) = (Vec::new(), Vec::new());
    g.write_nodes_tsv(&mut nodes)?;
    g.write_edges_tsv(&mut edges)?;
    write_file(&dir.join("nodes.tsv"), &nodes)?;
    write_file(&dir.join("edges.tsv"), &edges)
}

fn cmd_synth(cli: &Cli, kind: &SynthKind) -> Outcome {
    match kind {
        SynthKind::Graph {
            n_nodes,
            edge_prob,
            weight_min,
            weight_max,
            out_dir,
        } => {
            let g = gen_random_graph(*n_nodes, *edge_prob, (*weight_min, *weight_max), seed(cli))?;
            write_graph(&g, out_dir)
        }
        SynthKind::WorkedExample { out_dir } => write_graph(&worked_example_graph(), out_dir),
        SynthKind::Panel {
            n,
            pi,
            alpha,
            beta,
            gamma,
            sigma_nu,
            sigma_eps,
            industries,
            years,
            intercept_sd,
            out,
        } => {
            let params = ScmParams {
                pi: *pi,
                alpha: *alpha,
                beta: *beta,
                gamma: *gamma,
                sigma_nu: *sigma_nu,
                sigma_eps: *sigma_eps,
                n: *n,
                seed: cli.shared.seed.unwrap_or(42),
                groups: industries.zip(*years).map(|(i, y)| GroupEffects {
                    n_industries: i,
                    n_years: y,
                    intercept_sd: *intercept_sd,
                }),
            };
            let mut buf = Vec::new();
            gen_scm_panel(&params)?.write_csv(&mut buf)?;
            emit(out.as_deref(), &buf)
        }
        SynthKind::Corpus {
            n_docs,
            noise,
            out_dir,
        } => {
            let params = CorpusParams::finance_default(*n_docs, *noise, seed(cli));
            let docs = gen_classification_corpus(&params)?;
            create_dir(out_dir)?;
            write_corpus_dir(out_dir, &docs)?;
            write_file(
                &out_dir.join("similarity.tsv"),
                params.similarity_table().as_bytes(),
            )
        }
    }
}
