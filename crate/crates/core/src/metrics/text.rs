/// Lowercased whitespace tokens with punctuation stripped from both edges.
/// Tokens that are pure punctuation vanish.
pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
        (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
    })
}

pub fn word_count(text: &str) -> usize {
    tokens(text).count()
}
