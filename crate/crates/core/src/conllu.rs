//! CoNLL-U ingestion, tree validation and surface-text reconstruction.
//!
//! Only the basic dependency layer is read: ID, FORM, UPOS, HEAD, DEPREL and
//! the `SpaceAfter=No` feature of the MISC column. Multiword-token ranges
//! (`3-4`) and empty nodes (`3.1`) are skipped.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepToken {
    pub id: usize,
    pub form: String,
    pub upos: String,
    /// Governing token, `0` for the root.
    pub head: usize,
    pub deprel: String,
    pub space_after: bool,
}

impl DepToken {
    pub fn new(id: usize, form: &str, upos: &str, head: usize, deprel: &str) -> Self {
        DepToken {
            id,
            form: form.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
            space_after: true,
        }
    }

    pub fn no_space_after(mut self) -> Self {
        self.space_after = false;
        self
    }
}

/// A dependency-parsed sentence.
///
/// Fields are public so that malformed trees can be represented and
/// inspected; [`DepSentence::violations`] reports everything wrong with one.
/// Sentences returned by [`parse_conllu`] are always valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSentence {
    pub sent_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub tokens: Vec<DepToken>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NoRoot,
    MultipleRoots(Vec<usize>),
    Cycle(Vec<usize>),
    DanglingHead { token: usize, head: usize },
    SelfHead(usize),
    NonConsecutiveId { position: usize, id: usize },
    EmptyForm(usize),
}

fn id_set(ids: &[usize]) -> String {
    let inner: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "sentence has no tokens"),
            Violation::NoRoot => write!(f, "no root token"),
            Violation::MultipleRoots(ids) => write!(f, "multiple roots: tokens {}", id_set(ids)),
            Violation::Cycle(ids) => write!(f, "cycle through tokens {}", id_set(ids)),
            Violation::DanglingHead { token, head } => {
                write!(
                    f,
                    "dangling head: token {token} points to missing token {head}"
                )
            }
            Violation::SelfHead(id) => write!(f, "token {id} is its own head"),
            Violation::NonConsecutiveId { position, id } => {
                write!(
                    f,
                    "token at position {position} has id {id}, expected {position}"
                )
            }
            Violation::EmptyForm(id) => write!(f, "token {id} has an empty form"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("sentence {sentence}, line {line}: {message}")]
    Malformed {
        sentence: String,
        line: usize,
        message: String,
    },
    #[error("sentence {sentence} (ending line {line}): {}", join_violations(.violations))]
    Invalid {
        sentence: String,
        line: usize,
        violations: Vec<Violation>,
    },
    #[error("line {line}: input is not valid UTF-8")]
    Encoding { line: usize },
    #[error("unknown token id {id} in sentence {sentence}")]
    UnknownToken { sentence: String, id: usize },
    #[error("cannot remove tokens from sentence {sentence}: {message}")]
    Removal { sentence: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl DepSentence {
    pub fn new(sent_id: impl Into<String>, tokens: Vec<DepToken>) -> Self {
        DepSentence {
            sent_id: sent_id.into(),
            text: None,
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token with 1-based id `id`.
    pub fn token(&self, id: usize) -> Option<&DepToken> {
        id.checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .filter(|t| t.id == id)
    }

    pub fn contains_id(&self, id: usize) -> bool {
        self.token(id).is_some()
    }

    pub fn root(&self) -> Option<usize> {
        let mut roots = self.tokens.iter().filter(|t| t.head == 0);
        match (roots.next(), roots.next()) {
            (Some(r), None) => Some(r.id),
            _ => None,
        }
    }

    /// Every invariant violation of the tree, in a stable order.
    pub fn violations(&self) -> Vec<Violation> {
        validate_tree(self).err().unwrap_or_default()
    }

    pub fn is_valid(&self) -> bool {
        validate_tree(self).is_ok()
    }

    /// Children lists indexed by token id (index 0 holds the root's dependents).
    pub(crate) fn children(&self) -> Vec<Vec<usize>> {
        let n = self.tokens.len();
        let mut children = vec![Vec::new(); n + 1];
        for t in &self.tokens {
            if t.head <= n && t.head != t.id {
                children[t.head].push(t.id);
            }
        }
        children
    }

    pub fn reconstruct_text(&self, exclude: &BTreeSet<usize>) -> Result<String, ConlluError> {
        reconstruct_text(self, exclude)
    }

    /// Drops the given tokens and renumbers the rest. Every removed token's
    /// dependents must be removed as well, and the root must stay.
    pub fn without_tokens(&self, exclude: &BTreeSet<usize>) -> Result<DepSentence, ConlluError> {
        self.check_ids(exclude)?;
        let mut new_id = vec![0usize; self.tokens.len() + 1];
        let mut next = 1;
        for t in &self.tokens {
            if !exclude.contains(&t.id) {
                new_id[t.id] = next;
                next += 1;
            }
        }
        let mut tokens = Vec::with_capacity(next - 1);
        for t in self.tokens.iter().filter(|t| !exclude.contains(&t.id)) {
            if t.head != 0 && (exclude.contains(&t.head) || t.head >= new_id.len()) {
                return Err(ConlluError::Removal {
                    sentence: self.sent_id.clone(),
                    message: format!("token {} depends on removed token {}", t.id, t.head),
                });
            }
            let mut tok = t.clone();
            tok.id = new_id[t.id];
            tok.head = if t.head == 0 { 0 } else { new_id[t.head] };
            tokens.push(tok);
        }
        if tokens.is_empty() || !tokens.iter().any(|t| t.head == 0) {
            return Err(ConlluError::Removal {
                sentence: self.sent_id.clone(),
                message: "the root would be removed".to_string(),
            });
        }
        let mut out = DepSentence::new(self.sent_id.clone(), tokens);
        out.text = Some(out.reconstruct_text(&BTreeSet::new())?);
        Ok(out)
    }

    fn check_ids(&self, ids: &BTreeSet<usize>) -> Result<(), ConlluError> {
        match ids.iter().find(|&&id| !self.contains_id(id)) {
            Some(&id) => Err(ConlluError::UnknownToken {
                sentence: self.sent_id.clone(),
                id,
            }),
            None => Ok(()),
        }
    }

    /// Serializes to a CoNLL-U block (with trailing blank line). LEMMA, XPOS,
    /// FEATS and DEPS are written as `_`.
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        if !self.sent_id.is_empty() {
            out.push_str(&format!("# sent_id = {}\n", self.sent_id));
        }
        if let Some(text) = &self.text {
            out.push_str(&format!("# text = {text}\n"));
        }
        for t in &self.tokens {
            let misc = if t.space_after { "_" } else { "SpaceAfter=No" };
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t{}\n",
                t.id, t.form, t.upos, t.head, t.deprel, misc
            ));
        }
        out.push('\n');
        out
    }
}

/// Checks the tree invariants, returning every violation found.
pub fn validate_tree(s: &DepSentence) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let n = s.tokens.len();
    if n == 0 {
        return Err(vec![Violation::Empty]);
    }
    for (pos, t) in s.tokens.iter().enumerate() {
        if t.id != pos + 1 {
            out.push(Violation::NonConsecutiveId {
                position: pos + 1,
                id: t.id,
            });
        }
        if t.form.is_empty() {
            out.push(Violation::EmptyForm(t.id));
        }
    }
    let roots: Vec<usize> = s
        .tokens
        .iter()
        .filter(|t| t.head == 0)
        .map(|t| t.id)
        .collect();
    match roots.len() {
        0 => out.push(Violation::NoRoot),
        1 => {}
        _ => out.push(Violation::MultipleRoots(roots)),
    }
    for t in &s.tokens {
        if t.head == t.id {
            out.push(Violation::SelfHead(t.id));
        } else if t.head > n {
            out.push(Violation::DanglingHead {
                token: t.id,
                head: t.head,
            });
        }
    }
    // Cycle detection only makes sense once positions and ids agree.
    if !out
        .iter()
        .any(|v| matches!(v, Violation::NonConsecutiveId { .. }))
    {
        for cycle in find_cycles(s) {
            out.push(Violation::Cycle(cycle));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Cycles in the head relation, each as a sorted id list. Self-loops are
/// reported separately and skipped here.
fn find_cycles(s: &DepSentence) -> Vec<Vec<usize>> {
    let n = s.tokens.len();
    // 0 = unvisited, 1 = on current path, 2 = resolved
    let mut state = vec![0u8; n + 1];
    let mut cycles = Vec::new();
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if cur == 0 || cur > n || state[cur] == 2 {
                break;
            }
            if state[cur] == 1 {
                let pos = path.iter().position(|&p| p == cur).unwrap_or(0);
                let mut cycle: Vec<usize> = path[pos..].to_vec();
                cycle.sort_unstable();
                if cycle.len() > 1 {
                    cycles.push(cycle);
                }
                break;
            }
            state[cur] = 1;
            path.push(cur);
            cur = s.tokens[cur - 1].head;
        }
        for p in path {
            state[p] = 2;
        }
    }
    cycles
}

/// Character range of each token in a reconstructed text, `None` when the
/// token was left out.
pub type TokenOffsets = Vec<Option<Range<usize>>>;

/// Surface text with the given tokens removed, plus the character range of
/// every kept token (indexed by `id - 1`, `None` for excluded tokens).
///
/// Forms are joined with a single space unless `space_after` is false; the
/// result has trailing whitespace trimmed. Offsets count Unicode scalar values.
pub fn reconstruct_with_offsets(
    s: &DepSentence,
    exclude: &BTreeSet<usize>,
) -> Result<(String, TokenOffsets), ConlluError> {
    s.check_ids(exclude)?;
    let mut text = String::new();
    let mut chars = 0usize;
    let mut ranges = Vec::with_capacity(s.tokens.len());
    for t in &s.tokens {
        if exclude.contains(&t.id) {
            ranges.push(None);
            continue;
        }
        let start = chars;
        text.push_str(&t.form);
        chars += t.form.chars().count();
        ranges.push(Some(start..chars));
        if t.space_after {
            text.push(' ');
            chars += 1;
        }
    }
    let trimmed_len = text.trim_end().len();
    text.truncate(trimmed_len);
    Ok((text, ranges))
}

pub fn reconstruct_text(s: &DepSentence, exclude: &BTreeSet<usize>) -> Result<String, ConlluError> {
    reconstruct_with_offsets(s, exclude).map(|(text, _)| text)
}

struct Block {
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<DepToken>,
    ordinal: usize,
    seen: HashSet<usize>,
}

impl Block {
    fn new(ordinal: usize) -> Self {
        Block {
            sent_id: None,
            text: None,
            tokens: Vec::new(),
            ordinal,
            seen: HashSet::new(),
        }
    }

    fn name(&self) -> String {
        match &self.sent_id {
            Some(id) => id.clone(),
            None => format!("#{}", self.ordinal),
        }
    }

    fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.sent_id.is_none() && self.text.is_none()
    }

    fn finish(self, line: usize) -> Result<DepSentence, ConlluError> {
        let name = self.name();
        let sentence = DepSentence {
            sent_id: self.sent_id.unwrap_or_else(|| self.ordinal.to_string()),
            text: self.text,
            tokens: self.tokens,
        };
        validate_tree(&sentence).map_err(|violations| ConlluError::Invalid {
            sentence: name,
            line,
            violations,
        })?;
        Ok(sentence)
    }
}

/// Parses every sentence block of a CoNLL-U stream.
pub fn parse_conllu<R: BufRead>(mut reader: R) -> Result<Vec<DepSentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut block = Block::new(1);
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let read = reader.read_until(b'\n', &mut buf)?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let line =
            std::str::from_utf8(&buf).map_err(|_| ConlluError::Encoding { line: line_no })?;
        let line = line.trim_end_matches(['\n', '\r']);
        let line = if line_no == 1 {
            line.trim_start_matches('\u{feff}')
        } else {
            line
        };
        if line.trim().is_empty() {
            if !block.is_empty() {
                let ordinal = block.ordinal;
                sentences.push(block.finish(line_no)?);
                block = Block::new(ordinal + 1);
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            parse_comment(comment, &mut block);
            continue;
        }
        parse_token_line(line, line_no, &mut block)?;
    }
    if !block.is_empty() {
        sentences.push(block.finish(line_no)?);
    }
    Ok(sentences)
}

pub fn parse_conllu_str(input: &str) -> Result<Vec<DepSentence>, ConlluError> {
    parse_conllu(input.as_bytes())
}

fn parse_comment(comment: &str, block: &mut Block) {
    let comment = comment.trim();
    if let Some((key, value)) = comment.split_once('=') {
        match key.trim() {
            "sent_id" => block.sent_id = Some(value.trim().to_string()),
            "text" => block.text = Some(value.trim().to_string()),
            _ => {}
        }
    }
}

fn parse_token_line(line: &str, line_no: usize, block: &mut Block) -> Result<(), ConlluError> {
    let malformed = |block: &Block, message: String| ConlluError::Malformed {
        sentence: block.name(),
        line: line_no,
        message,
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(malformed(
            block,
            format!("expected 10 tab-separated columns, found {}", cols.len()),
        ));
    }
    let id_col = cols[0];
    if id_col.contains('-') || id_col.contains('.') {
        // multiword-token range or empty node
        return Ok(());
    }
    let id: usize = id_col
        .parse()
        .ok()
        .filter(|&id| id >= 1)
        .ok_or_else(|| malformed(block, format!("invalid token id {id_col:?}")))?;
    if !block.seen.insert(id) {
        return Err(malformed(block, format!("duplicate token id {id}")));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| malformed(block, format!("non-integer head {:?}", cols[6])))?;
    let form = cols[1];
    if form.is_empty() {
        return Err(malformed(block, "empty form".to_string()));
    }
    let space_after = !cols[9].split('|').any(|f| f == "SpaceAfter=No");
    block.tokens.push(DepToken {
        id,
        form: form.to_string(),
        upos: cols[3].to_string(),
        head,
        deprel: cols[7].to_string(),
        space_after,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hi_there() -> DepSentence {
        DepSentence::new(
            "s1",
            vec![
                DepToken::new(1, "Hi", "INTJ", 0, "root"),
                DepToken::new(2, "there", "ADV", 1, "advmod").no_space_after(),
                DepToken::new(3, "!", "PUNCT", 1, "punct"),
            ],
        )
    }

    #[test]
    fn parses_minimal_block() {
        let input =
            "1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_\n2\tthere\tthere\tADV\t_\t_\t1\tadvmod\t_\t_\n\n";
        let parsed = parse_conllu_str(input).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].len(), 2);
        assert_eq!(parsed[0].root(), Some(1));
    }

    #[test]
    fn two_roots_is_rejected() {
        let input = "1\tHi\t_\tINTJ\t_\t_\t0\troot\t_\t_\n2\tthere\t_\tADV\t_\t_\t0\troot\t_\t_\n";
        let err = parse_conllu_str(input).unwrap_err();
        assert!(err.to_string().contains("multiple roots"), "{err}");
    }

    #[test]
    fn malformed_lines_name_sentence_and_line() {
        let input = "# sent_id = a\n1\tHi\t_\tINTJ\t_\t_\t0\troot\t_\n";
        let err = parse_conllu_str(input).unwrap_err().to_string();
        assert!(
            err.contains("sentence a") && err.contains("line 2"),
            "{err}"
        );

        let input = "1\tHi\t_\tINTJ\t_\t_\tx\troot\t_\t_\n";
        let err = parse_conllu_str(input).unwrap_err().to_string();
        assert!(err.contains("non-integer head"), "{err}");

        let input = "1\tHi\t_\tINTJ\t_\t_\t0\troot\t_\t_\n1\tHo\t_\tINTJ\t_\t_\t1\tdep\t_\t_\n";
        let err = parse_conllu_str(input).unwrap_err().to_string();
        assert!(
            err.contains("duplicate token id 1") && err.contains("line 2"),
            "{err}"
        );
    }

    #[test]
    fn skips_multiword_ranges_and_empty_nodes() {
        let input = "# text = del mar\n\
                     1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n\
                     1\tde\t_\tADP\t_\t_\t3\tcase\t_\t_\n\
                     2\tel\t_\tDET\t_\t_\t3\tdet\t_\t_\n\
                     2.1\tx\t_\tX\t_\t_\t_\t_\t_\t_\n\
                     3\tmar\t_\tNOUN\t_\t_\t0\troot\t_\tSpaceAfter=No\n";
        let s = &parse_conllu_str(input).unwrap()[0];
        let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
        assert_eq!(forms, ["de", "el", "mar"]);
        assert!(!s.tokens[2].space_after);
        assert_eq!(s.text.as_deref(), Some("del mar"));
        // token-based text wins over the raw comment
        assert_eq!(s.reconstruct_text(&BTreeSet::new()).unwrap(), "de el mar");
    }

    #[test]
    fn validate_reports_all_violations() {
        let chain = DepSentence::new(
            "c",
            vec![
                DepToken::new(1, "a", "X", 2, "dep"),
                DepToken::new(2, "b", "X", 3, "dep"),
                DepToken::new(3, "c", "X", 0, "root"),
            ],
        );
        assert!(validate_tree(&chain).is_ok());

        let cyclic = DepSentence::new(
            "c",
            vec![
                DepToken::new(1, "a", "X", 2, "dep"),
                DepToken::new(2, "b", "X", 1, "dep"),
                DepToken::new(3, "c", "X", 0, "root"),
            ],
        );
        let v = validate_tree(&cyclic).unwrap_err();
        assert_eq!(v, vec![Violation::Cycle(vec![1, 2])]);
        assert_eq!(v[0].to_string(), "cycle through tokens {1,2}");

        let dangling = DepSentence::new(
            "d",
            vec![
                DepToken::new(1, "a", "X", 7, "dep"),
                DepToken::new(2, "b", "X", 3, "dep"),
                DepToken::new(3, "c", "X", 0, "root"),
            ],
        );
        let v = validate_tree(&dangling).unwrap_err();
        assert!(v[0].to_string().starts_with("dangling head"));

        let many = DepSentence::new(
            "m",
            vec![
                DepToken::new(1, "a", "X", 0, "root"),
                DepToken::new(2, "b", "X", 2, "dep"),
                DepToken::new(4, "c", "X", 0, "root"),
            ],
        );
        let v = validate_tree(&many).unwrap_err();
        assert!(v.contains(&Violation::MultipleRoots(vec![1, 4])));
        assert!(v.contains(&Violation::SelfHead(2)));
        assert!(v.contains(&Violation::NonConsecutiveId { position: 3, id: 4 }));
    }

    #[test]
    fn reconstruct_respects_spacing() {
        let s = hi_there();
        assert_eq!(s.reconstruct_text(&BTreeSet::new()).unwrap(), "Hi there!");
        assert_eq!(s.reconstruct_text(&BTreeSet::from([2])).unwrap(), "Hi !");
        assert!(matches!(
            s.reconstruct_text(&BTreeSet::from([9])),
            Err(ConlluError::UnknownToken { id: 9, .. })
        ));
    }

    #[test]
    fn reconstruct_chinese_without_spaces() {
        let forms = ["医院", "和", "企业", "共同", "研发"];
        let tokens = forms
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let head = if i == 4 { 0 } else { 5 };
                DepToken::new(i + 1, f, "NOUN", head, "dep").no_space_after()
            })
            .collect();
        let s = DepSentence::new("zh", tokens);
        assert_eq!(
            s.reconstruct_text(&BTreeSet::new()).unwrap(),
            "医院和企业共同研发"
        );
        assert_eq!(
            s.reconstruct_text(&BTreeSet::from([3])).unwrap(),
            "医院和共同研发"
        );
        let (_, offsets) = reconstruct_with_offsets(&s, &BTreeSet::new()).unwrap();
        assert_eq!(offsets[2], Some(3..5));
    }

    #[test]
    fn without_tokens_renumbers() {
        let s = hi_there();
        let partial = s.without_tokens(&BTreeSet::from([2])).unwrap();
        assert_eq!(partial.len(), 2);
        assert_eq!(partial.tokens[1].id, 2);
        assert_eq!(partial.tokens[1].head, 1);
        assert!(partial.is_valid());
        assert!(s.without_tokens(&BTreeSet::from([1])).is_err());
    }

    fn arb_sentence() -> impl Strategy<Value = DepSentence> {
        (1usize..10)
            .prop_flat_map(|n| {
                (
                    Just(n),
                    proptest::collection::vec(0usize..1000, n),
                    proptest::collection::vec("[a-zA-Zäö]{1,6}", n),
                    proptest::collection::vec(any::<bool>(), n),
                    proptest::sample::select(vec!["NOUN", "VERB", "DET", "ADP", "PUNCT"]),
                )
            })
            .prop_map(|(n, picks, forms, spaces, upos)| {
                // node order[0] is the root; every later node attaches to an earlier one
                let mut order: Vec<usize> = (1..=n).collect();
                for i in (1..n).rev() {
                    order.swap(i, picks[i] % (i + 1));
                }
                let mut heads = vec![0; n + 1];
                for i in 1..n {
                    heads[order[i]] = order[picks[i] % i];
                }
                let tokens = (1..=n)
                    .map(|id| DepToken {
                        id,
                        form: forms[id - 1].clone(),
                        upos: upos.to_string(),
                        head: heads[id],
                        deprel: "dep".to_string(),
                        space_after: spaces[id - 1],
                    })
                    .collect();
                DepSentence::new("gen", tokens)
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(s in arb_sentence()) {
            prop_assert!(s.is_valid());
            let parsed = parse_conllu_str(&s.to_conllu()).unwrap();
            prop_assert_eq!(parsed, vec![s]);
        }

        #[test]
        fn deletion_never_lengthens(s in arb_sentence(), pick in any::<proptest::sample::Index>()) {
            let full = s.reconstruct_text(&BTreeSet::new()).unwrap();
            let id = pick.index(s.len()) + 1;
            let partial = s.reconstruct_text(&BTreeSet::from([id])).unwrap();
            prop_assert!(full.chars().count() >= partial.chars().count());
        }

        #[test]
        fn never_panics_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
            let _ = parse_conllu(&bytes[..]);
        }

        #[test]
        fn never_panics_on_tabbed_garbage(lines in proptest::collection::vec("[0-9.\\-_a-z]{0,3}(\t[0-9_a-zA-Z=|]{0,4}){0,11}", 0..12)) {
            let _ = parse_conllu_str(&lines.join("\n"));
        }
    }
}
