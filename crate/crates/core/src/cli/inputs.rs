//! Reading command inputs and building backends.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use super::{input_error, BackendArgs, CliError, FileConfig, InputArgs, LangArgs, SpanArgs};
use crate::conllu::{parse_conllu, DepSentence};
use crate::detector::{Backends, SegmentPair};
use crate::scoring::{
    Direction, Lexicon, LexiconScorer, NdjsonChannel, Scorer, ServiceBackend, DEFAULT_TIMEOUT,
};
use crate::spans::PosConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Lexicon(PathBuf),
    Command(String),
    Tcp(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s.split_once(':').ok_or_else(|| {
            format!("backend {s:?} should look like lexicon:PATH, cmd:COMMAND or tcp:HOST:PORT")
        })?;
        if rest.is_empty() {
            return Err(format!("backend {s:?} is missing its argument"));
        }
        match scheme {
            "lexicon" => Ok(BackendSpec::Lexicon(PathBuf::from(rest))),
            "cmd" => Ok(BackendSpec::Command(rest.to_string())),
            "tcp" => Ok(BackendSpec::Tcp(rest.to_string())),
            other => Err(format!("unknown backend kind {other:?}")),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Lexicon(p) => write!(f, "lexicon:{}", p.display()),
            BackendSpec::Command(c) => write!(f, "cmd:{c}"),
            BackendSpec::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

pub(crate) fn open_channel(
    spec: &BackendSpec,
    timeout: Duration,
) -> Result<Arc<NdjsonChannel>, CliError> {
    let ch = match spec {
        BackendSpec::Command(cmd) => NdjsonChannel::spawn(cmd, timeout),
        BackendSpec::Tcp(addr) => NdjsonChannel::connect(addr, timeout),
        BackendSpec::Lexicon(_) => unreachable!("lexicon backends have no channel"),
    };
    ch.map(Arc::new)
        .map_err(|e| CliError::Backend(format!("cannot reach backend {spec}: {e}")))
}

pub(crate) fn direction(langs: &LangArgs, config: &FileConfig) -> Result<Direction, CliError> {
    let src = langs.src_lang.clone().or_else(|| config.src_lang.clone());
    let tgt = langs.tgt_lang.clone().or_else(|| config.tgt_lang.clone());
    match (src, tgt) {
        (Some(s), Some(t)) => Direction::new(s, t).map_err(|e| CliError::Input(e.to_string())),
        _ => Err(CliError::Input(
            "--src-lang and --tgt-lang are required".into(),
        )),
    }
}

pub(crate) fn pos_config(
    pos: Option<&str>,
    pos_file: Option<&Path>,
    config: &FileConfig,
) -> Result<PosConfig, CliError> {
    let res = match (pos, pos_file, &config.pos) {
        (Some(list), _, _) => PosConfig::parse_list(list),
        (None, Some(path), _) => PosConfig::from_file(path),
        (None, None, Some(tags)) => PosConfig::new(tags),
        (None, None, None) => return Ok(PosConfig::default()),
    };
    res.map_err(|e| CliError::Input(e.to_string()))
}

pub(crate) fn span_pos(args: &SpanArgs, config: &FileConfig) -> Result<PosConfig, CliError> {
    pos_config(args.pos.as_deref(), args.pos_file.as_deref(), config)
}

/// Forward and reverse scorers for `direction`. Service backends handle
/// both directions over one connection; a lexicon is inverted.
pub(crate) fn build_backends(
    args: &BackendArgs,
    config: &FileConfig,
    direction: &Direction,
) -> Result<Backends, CliError> {
    let raw = args
        .backend
        .clone()
        .or_else(|| config.backend.clone())
        .ok_or_else(|| {
            CliError::Input(format!(
                "no backend given (use --backend or {})",
                super::BACKEND_ENV
            ))
        })?;
    let spec: BackendSpec = raw.parse().map_err(CliError::Input)?;
    let lambda_src = args.lambda_src.or(config.lambda_src);
    let lambda_tgt = args.lambda_tgt.or(config.lambda_tgt);
    let timeout = args
        .timeout_secs
        .or(config.timeout_secs)
        .map(Duration::from_secs)
        .unwrap_or(DEFAULT_TIMEOUT);
    match &spec {
        BackendSpec::Lexicon(path) => {
            let lexicon = Lexicon::from_file(path).map_err(|e| input_error(path.display(), e))?;
            let scorer = LexiconScorer::new(lexicon)
                .with_penalties(lambda_src.unwrap_or(1.0), lambda_tgt.unwrap_or(1.0))
                .map_err(CliError::Input)?;
            let reverse = scorer.reversed();
            Ok(Backends {
                direction: direction.clone(),
                forward: Arc::new(Scorer::new(Arc::new(scorer))),
                reverse: Some(Arc::new(Scorer::new(Arc::new(reverse)))),
            })
        }
        BackendSpec::Command(_) | BackendSpec::Tcp(_) => {
            if lambda_src.is_some() || lambda_tgt.is_some() {
                return Err(CliError::Input(
                    "--lambda-src/--lambda-tgt only apply to lexicon backends".into(),
                ));
            }
            let channel = open_channel(&spec, timeout)?;
            let scorer = Arc::new(Scorer::new(Arc::new(ServiceBackend::new(channel))));
            Ok(Backends {
                direction: direction.clone(),
                forward: scorer.clone(),
                reverse: Some(scorer),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitextRow {
    pub id: Option<String>,
    pub source: String,
    pub target: String,
}

/// Parses `source<TAB>target` or `id<TAB>source<TAB>target` lines; blank
/// lines are skipped.
pub fn parse_bitext(text: &str) -> Result<Vec<BitextRow>, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let row = match cols.as_slice() {
            [s, t] => BitextRow {
                id: None,
                source: s.to_string(),
                target: t.to_string(),
            },
            [id, s, t] => BitextRow {
                id: Some(id.to_string()),
                source: s.to_string(),
                target: t.to_string(),
            },
            _ => {
                return Err(format!(
                    "line {}: expected 2 or 3 tab-separated columns, found {}",
                    i + 1,
                    cols.len()
                ))
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn read_conllu(path: &Path) -> Result<Vec<DepSentence>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| input_error(path.display(), e))?;
    parse_conllu(std::io::BufReader::new(file)).map_err(|e| input_error(path.display(), e))
}

/// Lines up the given inputs by position into segment pairs.
pub(crate) fn load_segments(args: &InputArgs) -> Result<Vec<SegmentPair>, CliError> {
    let src = args.src_conllu.as_deref().map(read_conllu).transpose()?;
    let tgt = args.tgt_conllu.as_deref().map(read_conllu).transpose()?;
    let bitext = match &args.bitext {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input_error(p.display(), e))?;
            Some(parse_bitext(&text).map_err(|e| input_error(p.display(), e))?)
        }
        None => None,
    };
    let lens: Vec<(&str, usize)> = [
        ("--src-conllu", src.as_ref().map(Vec::len)),
        ("--tgt-conllu", tgt.as_ref().map(Vec::len)),
        ("--bitext", bitext.as_ref().map(Vec::len)),
    ]
    .into_iter()
    .filter_map(|(n, l)| l.map(|l| (n, l)))
    .collect();
    let Some(&(_, n)) = lens.first() else {
        return Err(CliError::Input(
            "no input given (use --src-conllu, --tgt-conllu or --bitext)".into(),
        ));
    };
    if let Some((name, len)) = lens.iter().find(|(_, l)| *l != n) {
        return Err(CliError::Input(format!(
            "inputs differ in length: {} has {len} segments, {} has {n}",
            name, lens[0].0
        )));
    }
    let mut src = src.map(|v| v.into_iter().map(Some).collect::<Vec<_>>());
    let mut tgt = tgt.map(|v| v.into_iter().map(Some).collect::<Vec<_>>());
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let sp = src.as_mut().and_then(|v| v[i].take());
        let tp = tgt.as_mut().and_then(|v| v[i].take());
        let row = bitext.as_ref().map(|b| &b[i]);
        let id = row
            .and_then(|r| r.id.clone())
            .or_else(|| sp.as_ref().map(|s| s.sent_id.clone()))
            .or_else(|| tp.as_ref().map(|s| s.sent_id.clone()))
            .unwrap_or_else(|| (i + 1).to_string());
        let pair = SegmentPair::new(
            id,
            row.map(|r| r.source.clone()),
            row.map(|r| r.target.clone()),
            sp,
            tp,
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
        if let Some(r) = row {
            for (side, given, used) in [
                ("source", &r.source, &pair.source_text),
                ("target", &r.target, &pair.target_text),
            ] {
                if given != used {
                    log::warn!("segment {}: {side} text from the parse differs from the bitext; using the parse", pair.id);
                }
            }
        }
        pairs.push(pair);
    }
    Ok(pairs)
}
