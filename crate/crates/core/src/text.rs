//! Caption text normalization shared by annotation, training and evaluation.

/// Lowercases, replaces punctuation (apostrophes excepted) with spaces and
/// splits on whitespace.
pub fn tokenize_caption(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '\'' || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_punctuation_and_lowercases() {
        assert_eq!(
            tokenize_caption("A man is driving a car."),
            ["a", "man", "is", "driving", "a", "car"]
        );
        assert_eq!(
            tokenize_caption("Two men are talking"),
            ["two", "men", "are", "talking"]
        );
        assert!(tokenize_caption("").is_empty());
        assert_eq!(tokenize_caption("it's a dog,cat!"), ["it's", "a", "dog", "cat"]);
    }
}
