use std::fmt::Write as _;
use std::io::BufRead;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::inputs::{
    build_backends, direction, load_segments, open_channel, pos_config, read_conllu, span_pos,
};
use super::{
    input_error, BackendSpec, CliError, Command, DetectArgs, DirectionArg, FileConfig, Output,
};
use crate::detector::{detect, DetectError, DetectionResult, DetectorConfig, Directions, SpanMode};
use crate::evalkit::{gold_eval, load_gold, read_predictions, synthetic_eval, FilterRules};
use crate::review::{build_tasks, AnswerStore, RunningServer, SamplingConfig, Session, Taxonomy};
use crate::scoring::DEFAULT_TIMEOUT;
use crate::spans::{extract_spans, token_level_spans};
use crate::synthgen::{
    dataset_stats, format_label_line, generate, GenConfig, LabelTokenizer, ServiceTranslator,
    SynthError, SynthSample, TranslateError, Translator, TsvTranslator, WordSubstitutionTranslator,
};

pub(crate) struct Context {
    pub seed: u64,
    pub pretty: bool,
    pub timing: bool,
    pub out: Output,
    pub config: FileConfig,
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(&item).expect("serializable"));
        s.push('\n');
    }
    s
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| input_error(path.display(), e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| input_error(path.display(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| input_error(format!("{} line {}", path.display(), i + 1), e))?,
        );
    }
    Ok(out)
}

pub(crate) fn dispatch(ctx: &Context, command: Command) -> Result<(), CliError> {
    match command {
        Command::Spans { conllu, spans } => {
            let pos = span_pos(&spans, &ctx.config)?;
            let sentences = read_conllu(&conllu)?;
            let mut out = String::new();
            for s in &sentences {
                let cands = if spans.token_level {
                    token_level_spans(s)
                } else {
                    extract_spans(s, &pos)
                };
                if ctx.pretty {
                    for c in &cands {
                        let ids: Vec<String> = c.token_ids.iter().map(usize::to_string).collect();
                        let _ = writeln!(out, "{}\t{}\t{}", s.sent_id, ids.join(","), c.text);
                    }
                } else {
                    let text = s
                        .reconstruct_text(&Default::default())
                        .map_err(|e| CliError::Input(e.to_string()))?;
                    out.push_str(&jsonl([
                        json!({ "sent_id": s.sent_id, "text": text, "spans": cands }),
                    ]));
                }
            }
            ctx.out.write(&out)
        }
        Command::Detect(args) => run_detect(ctx, &args),
        Command::Bench(args) => run_bench(ctx, &args),
        Command::Synth {
            conllu,
            langs,
            translations,
            substitution_lexicon,
            translate_backend,
            deletion_prob,
            pos,
            pos_file,
            tags_dir,
        } => {
            let direction = direction(&langs, &ctx.config)?;
            let mut cfg = GenConfig::new(direction, ctx.seed);
            if let Some(p) = deletion_prob.or(ctx.config.deletion_prob) {
                cfg = cfg
                    .with_deletion_prob(p)
                    .map_err(|e| CliError::Input(e.to_string()))?;
            }
            cfg.pos = pos_config(pos.as_deref(), pos_file.as_deref(), &ctx.config)?;
            let translator: Box<dyn Translator> = match (translations, substitution_lexicon, translate_backend) {
                (Some(p), None, None) => {
                    Box::new(TsvTranslator::from_file(&p).map_err(|e| input_error(p.display(), e))?)
                }
                (None, Some(p), None) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| input_error(p.display(), e))?;
                    let pairs = super::parse_bitext(&text).map_err(|e| input_error(p.display(), e))?;
                    Box::new(WordSubstitutionTranslator::new(pairs.into_iter().map(|r| (r.source, r.target))))
                }
                (None, None, Some(spec)) => {
                    let spec: BackendSpec = spec.parse().map_err(CliError::Input)?;
                    if matches!(spec, BackendSpec::Lexicon(_)) {
                        return Err(CliError::Input(
                            "--translate-backend takes cmd: or tcp:; use --substitution-lexicon for a lexicon".into(),
                        ));
                    }
                    let timeout = ctx.config.timeout_secs.map(Duration::from_secs).unwrap_or(DEFAULT_TIMEOUT);
                    Box::new(ServiceTranslator::new(open_channel(&spec, timeout)?))
                }
                _ => {
                    return Err(CliError::Input(
                        "one of --translations, --substitution-lexicon or --translate-backend is required".into(),
                    ))
                }
            };
            let corpus = read_conllu(&conllu)?;
            let samples = generate(&corpus, translator.as_ref(), &cfg).map_err(|e| match &e {
                SynthError::Translate {
                    source: TranslateError::Service(_),
                    ..
                } => CliError::Backend(e.to_string()),
                _ => CliError::Input(e.to_string()),
            })?;
            if let Some(dir) = tags_dir {
                write_tag_files(&dir, &samples)?;
            }
            if ctx.pretty {
                ctx.out.write(&dataset_stats(&samples).to_table())
            } else {
                ctx.out.write(&jsonl(&samples))
            }
        }
        Command::Eval {
            predictions,
            gold,
            samples,
            truncation_marks,
            no_truncation_filter,
            keep_multi_sentence,
            langs,
        } => {
            let preds = {
                let file = std::fs::File::open(&predictions)
                    .map_err(|e| input_error(predictions.display(), e))?;
                read_predictions(std::io::BufReader::new(file))
                    .map_err(|e| input_error(predictions.display(), e))?
            };
            let report = match (gold, samples) {
                (Some(g), None) => {
                    let file = std::fs::File::open(&g).map_err(|e| input_error(g.display(), e))?;
                    let segments = load_gold(file).map_err(|e| input_error(g.display(), e))?;
                    let rules = FilterRules {
                        truncation_marks: (!no_truncation_filter).then_some(truncation_marks),
                        drop_multi_sentence: !keep_multi_sentence,
                    };
                    let r = gold_eval(segments, &rules, &preds)
                        .map_err(|e| CliError::Input(e.to_string()))?;
                    serde_json::to_value(r).expect("serializable")
                }
                (None, Some(s)) => {
                    let samples: Vec<SynthSample> = read_jsonl(&s)?;
                    let lang = |flag: &Option<String>,
                                conf: &Option<String>,
                                pick: fn(&DetectionResult) -> &str| {
                        flag.clone()
                            .or_else(|| conf.clone())
                            .or_else(|| preds.first().map(|p| pick(p).to_string()))
                            .unwrap_or_default()
                    };
                    let src = lang(&langs.src_lang, &ctx.config.src_lang, |p| &p.src_lang);
                    let tgt = lang(&langs.tgt_lang, &ctx.config.tgt_lang, |p| &p.tgt_lang);
                    let r = synthetic_eval(
                        &samples,
                        &preds,
                        LabelTokenizer::for_language(&src),
                        LabelTokenizer::for_language(&tgt),
                    )
                    .map_err(|e| CliError::Input(e.to_string()))?;
                    serde_json::to_value(r).expect("serializable")
                }
                _ => {
                    return Err(CliError::Input(
                        "eval needs exactly one of --gold or --samples".into(),
                    ))
                }
            };
            if ctx.pretty {
                ctx.out.write(&eval_table(&report))
            } else {
                ctx.out.write(&jsonl([report]))
            }
        }
        Command::Stats { samples } => {
            let samples: Vec<SynthSample> = read_jsonl(&samples)?;
            let st = dataset_stats(&samples);
            if ctx.pretty {
                ctx.out.write(&st.to_table())
            } else {
                ctx.out.write(&jsonl([st]))
            }
        }
        Command::Tasks {
            predictions,
            raters,
            overlap,
            sample,
            taxonomy,
        } => {
            let preds: Vec<DetectionResult> = read_jsonl(&predictions)?;
            let taxonomy = match taxonomy {
                Some(p) => Taxonomy::from_file(&p).map_err(|e| input_error(p.display(), e))?,
                None => Taxonomy::default(),
            };
            let cfg = SamplingConfig {
                sample_size: sample,
                overlap,
                raters,
                seed: ctx.seed,
            };
            let session =
                build_tasks(&preds, &cfg, taxonomy).map_err(|e| CliError::Input(e.to_string()))?;
            let mut buf = Vec::new();
            session
                .write(&mut buf)
                .map_err(|e| CliError::Input(e.to_string()))?;
            ctx.out
                .write(&String::from_utf8(buf).expect("json is utf-8"))
        }
        Command::Serve {
            session,
            answers,
            addr,
            ui,
        } => {
            let s = Session::load(&session).map_err(|e| input_error(session.display(), e))?;
            let store = AnswerStore::open(Arc::new(s), &answers)
                .map_err(|e| input_error(answers.display(), e))?;
            let addr: SocketAddr = addr
                .parse()
                .map_err(|e| input_error(format!("address {addr:?}"), e))?;
            let server = RunningServer::start(Arc::new(store), addr, ui)
                .map_err(|e| CliError::Input(e.to_string()))?;
            eprintln!("review service listening on http://{}", server.addr());
            server.wait().map_err(|e| CliError::Input(e.to_string()))
        }
    }
}

fn write_tag_files(dir: &Path, samples: &[SynthSample]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| input_error(dir.display(), e))?;
    let mut files: [(&str, String); 4] = Default::default();
    files[0].0 = "src";
    files[1].0 = "mt";
    files[2].0 = "src.tags";
    files[3].0 = "mt.tags";
    for s in samples {
        let _ = writeln!(files[0].1, "{}", s.source);
        let _ = writeln!(files[1].1, "{}", s.target);
        let _ = writeln!(
            files[2].1,
            "{}",
            format_label_line(&s.src_tokens, &s.src_labels)
        );
        let _ = writeln!(
            files[3].1,
            "{}",
            format_label_line(&s.tgt_tokens, &s.tgt_labels)
        );
    }
    for (name, text) in files {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| input_error(p.display(), e))?;
    }
    Ok(())
}

fn eval_table(report: &serde_json::Value) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>9} {:>9}",
        "kind", "precision", "recall", "f1", "mcc"
    );
    for kind in ["addition", "omission"] {
        let Some(r) = report.get(kind) else { continue };
        let seg = r.get("segments").unwrap_or(r);
        let num =
            |v: Option<&serde_json::Value>| v.and_then(|x| x.as_f64()).map(|x| format!("{:.3}", x));
        let mcc = num(r.get("tokens").and_then(|t| t.get("mcc"))).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>9}",
            kind,
            num(seg.get("precision")).unwrap_or_default(),
            num(seg.get("recall")).unwrap_or_default(),
            num(seg.get("f1")).unwrap_or_default(),
            mcc
        );
    }
    out
}

fn detector_setup(
    ctx: &Context,
    args: &DetectArgs,
) -> Result<(DetectorConfig, Directions), CliError> {
    let mut cfg = DetectorConfig::default();
    if let Some(m) = args.margin.or(ctx.config.margin) {
        cfg = cfg
            .with_margin(m)
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    if let Some(p) = args
        .overlap_policy
        .map(Into::into)
        .or(ctx.config.overlap_policy)
    {
        cfg.overlap_policy = p;
    }
    cfg.pos = span_pos(&args.spans, &ctx.config)?;
    if args.spans.token_level {
        cfg.span_mode = SpanMode::TokenLevel;
    }
    let wanted = args
        .direction
        .or(ctx.config.direction)
        .unwrap_or(DirectionArg::Both);
    let (src, tgt) = (
        args.inputs.src_conllu.is_some(),
        args.inputs.tgt_conllu.is_some(),
    );
    match wanted {
        DirectionArg::Omission if !src => {
            return Err(CliError::Input(
                "omission detection requires --src-conllu".into(),
            ))
        }
        DirectionArg::Addition if !tgt => {
            return Err(CliError::Input(
                "addition detection requires --tgt-conllu".into(),
            ))
        }
        DirectionArg::Both if !src && !tgt => {
            return Err(CliError::Input(
                "detection requires --src-conllu and/or --tgt-conllu".into(),
            ))
        }
        _ => {}
    }
    Ok((cfg, wanted.into()))
}

fn detect_error(segment: &str, e: DetectError) -> CliError {
    match e {
        DetectError::Backend { .. } => CliError::Backend(format!("segment {segment}: {e}")),
        _ => CliError::Input(format!("segment {segment}: {e}")),
    }
}

fn run_detect(ctx: &Context, args: &DetectArgs) -> Result<(), CliError> {
    let (cfg, wanted) = detector_setup(ctx, args)?;
    let direction = direction(&args.langs, &ctx.config)?;
    let pairs = load_segments(&args.inputs)?;
    let backends = build_backends(&args.backend, &ctx.config, &direction)?;
    let results: Vec<Result<DetectionResult, CliError>> = pairs
        .par_iter()
        .map(|p| detect(p, &backends, &cfg, wanted).map_err(|e| detect_error(&p.id, e)))
        .collect();
    let mut done = Vec::with_capacity(results.len());
    for r in results {
        let mut r = r?;
        if !ctx.timing {
            r.wall_time = Duration::ZERO;
        }
        done.push(r);
    }
    if ctx.pretty {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:<9} {:>9}  span", "segment", "kind", "delta");
        for r in &done {
            for d in &r.detections {
                let _ = writeln!(
                    out,
                    "{:<16} {:<9} {:>9.4}  {}",
                    r.segment_id, d.kind, d.delta, d.span.text
                );
            }
        }
        ctx.out.write(&out)
    } else {
        ctx.out.write(&jsonl(&done))
    }
}

#[derive(Serialize)]
struct BenchRecord {
    segment_id: String,
    source_candidates: usize,
    target_candidates: usize,
    score_requests: usize,
    score_calls: usize,
    /// Candidates plus one full-sequence score per direction run.
    expected_calls: usize,
    wall_time_ms: f64,
}

fn run_bench(ctx: &Context, args: &DetectArgs) -> Result<(), CliError> {
    let (cfg, wanted) = detector_setup(ctx, args)?;
    let direction = direction(&args.langs, &ctx.config)?;
    let pairs = load_segments(&args.inputs)?;
    let backends = build_backends(&args.backend, &ctx.config, &direction)?;
    let mut records = Vec::with_capacity(pairs.len());
    for p in &pairs {
        backends.forward.clear_cache();
        if let Some(r) = &backends.reverse {
            r.clear_cache();
        }
        let r = detect(p, &backends, &cfg, wanted).map_err(|e| detect_error(&p.id, e))?;
        records.push(BenchRecord {
            segment_id: r.segment_id.clone(),
            source_candidates: r.source_candidates,
            target_candidates: r.target_candidates,
            score_requests: r.score_requests,
            score_calls: r.score_calls,
            expected_calls: r.source_candidates + r.target_candidates + r.directions.len(),
            wall_time_ms: if ctx.timing {
                r.wall_time.as_secs_f64() * 1000.0
            } else {
                0.0
            },
        });
    }
    let n = records.len().max(1) as f64;
    let calls: usize = records.iter().map(|r| r.score_calls).sum();
    let wall: f64 = records.iter().map(|r| r.wall_time_ms).sum();
    let summary = json!({
        "summary": {
            "segments": records.len(),
            "score_calls": calls,
            "score_calls_per_segment": calls as f64 / n,
            "wall_time_ms": wall,
            "wall_time_ms_per_segment": wall / n,
            "calls_match_expected": records.iter().all(|r| r.score_calls == r.expected_calls),
        }
    });
    if ctx.pretty {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>5} {:>7} {:>9} {:>10}",
            "segment", "S", "T", "calls", "expected", "ms"
        );
        for r in &records {
            let _ = writeln!(
                out,
                "{:<16} {:>5} {:>5} {:>7} {:>9} {:>10.2}",
                r.segment_id,
                r.source_candidates,
                r.target_candidates,
                r.score_calls,
                r.expected_calls,
                r.wall_time_ms
            );
        }
        let _ = writeln!(out, "mean score calls per segment: {:.2}", calls as f64 / n);
        let _ = writeln!(out, "mean wall time per segment: {:.2} ms", wall / n);
        ctx.out.write(&out)
    } else {
        let mut out = jsonl(&records);
        out.push_str(&jsonl([summary]));
        ctx.out.write(&out)
    }
}
