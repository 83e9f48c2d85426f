/// A lowercased token with the character range `[start, end)` it covers in
/// the original text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits on whitespace and punctuation boundaries. Runs of alphanumeric
/// characters form one token; every other non-whitespace character is a
/// token of its own. Offsets count Unicode scalar values.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word: Option<(usize, String)> = None;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.get_or_insert_with(|| (pos, String::new())).1.push(ch);
        } else {
            if let Some((start, w)) = word.take() {
                tokens.push(Token {
                    text: w.to_lowercase(),
                    start,
                    end: pos,
                });
            }
            if !ch.is_whitespace() {
                tokens.push(Token {
                    text: ch.to_lowercase().collect(),
                    start: pos,
                    end: pos + 1,
                });
            }
        }
        pos += 1;
    }
    if let Some((start, w)) = word {
        tokens.push(Token {
            text: w.to_lowercase(),
            start,
            end: pos,
        });
    }
    tokens
}

/// Smallest inclusive token range covering characters `[from, to)`.
pub(crate) fn covering_span(tokens: &[Token], from: usize, to: usize) -> Option<(usize, usize)> {
    let first = tokens.iter().position(|t| t.end > from && t.start < to)?;
    let last = tokens.iter().rposition(|t| t.end > from && t.start < to)?;
    Some((first, last))
}
