use std::path::Path;

use roxmltree::{Document, Node, ParsingOptions};

use super::tokenize::{covering_span, tokenize};
use super::{category_index, Aspect, LabeledInstance, Polarity, Task};
use crate::error::{Error, Result};

/// Reads a SemEval-2014 Task 4 file and expands every sentence into one
/// instance per aspect. Aspects labeled `conflict` are dropped, and so are
/// sentences left without an aspect.
pub fn parse_semeval_xml(path: &Path, task: Task) -> Result<Vec<LabeledInstance>> {
    let text = std::fs::read_to_string(path)?;
    parse_semeval_document(&text, task, &path.display().to_string())
}

pub fn parse_semeval_str(xml: &str, task: Task) -> Result<Vec<LabeledInstance>> {
    parse_semeval_document(xml, task, "<memory>")
}

fn parse_semeval_document(xml: &str, task: Task, source: &str) -> Result<Vec<LabeledInstance>> {
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(xml, opts)
        .map_err(|e| Error::parse(format!("{source}:{}", e.pos()), e.to_string()))?;

    let mut out = Vec::new();
    for sentence in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let loc = || {
            let pos = doc.text_pos_at(sentence.range().start);
            match sentence.attribute("id") {
                Some(id) => format!("{source}:{pos} (sentence {id})"),
                None => format!("{source}:{pos}"),
            }
        };
        let text = child(sentence, "text")
            .map(|t| t.text().unwrap_or(""))
            .ok_or_else(|| Error::parse(loc(), "sentence without a <text> element"))?;
        let tokens = tokenize(text);
        if tokens.is_empty() {
            continue;
        }
        let words: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();

        match task {
            Task::Atsa => {
                let Some(terms) = child(sentence, "aspectTerms") else { continue };
                for term in terms.children().filter(|n| n.has_tag_name("aspectTerm")) {
                    let Some(polarity) = polarity_of(term, &loc)? else { continue };
                    let from = offset(term, "from", &loc)?;
                    let to = offset(term, "to", &loc)?;
                    let (start, end) = covering_span(&tokens, from, to)
                        .or_else(|| find_term(&words, term.attribute("term").unwrap_or("")))
                        .ok_or_else(|| {
                            Error::parse(
                                loc(),
                                format!("aspect term offsets {from}..{to} cover no token"),
                            )
                        })?;
                    out.push(LabeledInstance::new(
                        words.clone(),
                        Aspect::Term { start, end },
                        polarity,
                    )?);
                }
            }
            Task::Acsa => {
                let Some(cats) = child(sentence, "aspectCategories") else { continue };
                for cat in cats.children().filter(|n| n.has_tag_name("aspectCategory")) {
                    let Some(polarity) = polarity_of(cat, &loc)? else { continue };
                    let name = cat
                        .attribute("category")
                        .ok_or_else(|| Error::parse(loc(), "aspectCategory without category"))?;
                    let idx = category_index(name)
                        .ok_or_else(|| Error::parse(loc(), format!("unknown category {name:?}")))?;
                    out.push(LabeledInstance::new(
                        words.clone(),
                        Aspect::Category(idx),
                        polarity,
                    )?);
                }
            }
        }
    }
    Ok(out)
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(tag))
}

/// `None` for conflict-labeled aspects.
fn polarity_of(node: Node, loc: &dyn Fn() -> String) -> Result<Option<Polarity>> {
    match node.attribute("polarity") {
        Some("conflict") => Ok(None),
        Some(p) => p
            .parse()
            .map(Some)
            .map_err(|e: Error| Error::parse(loc(), e.to_string())),
        None => Err(Error::parse(loc(), "aspect without polarity")),
    }
}

fn offset(node: Node, attr: &str, loc: &dyn Fn() -> String) -> Result<usize> {
    node.attribute(attr)
        .ok_or_else(|| Error::parse(loc(), format!("aspectTerm without {attr:?}")))?
        .parse()
        .map_err(|_| Error::parse(loc(), format!("non-numeric {attr:?} offset")))
}

/// Fallback when offsets cover nothing: first occurrence of the term's own
/// tokens in the sentence.
fn find_term(words: &[String], term: &str) -> Option<(usize, usize)> {
    let needle: Vec<String> = tokenize(term).into_iter().map(|t| t.text).collect();
    if needle.is_empty() || needle.len() > words.len() {
        return None;
    }
    words
        .windows(needle.len())
        .position(|w| w == needle.as_slice())
        .map(|s| (s, s + needle.len() - 1))
}
