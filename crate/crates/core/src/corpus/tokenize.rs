// Copyright 2026 The semloss Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// Lowercase `text`, split every non-alphanumeric, non-whitespace character
/// into its own token, and collapse whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn travel_example() {
        assert_eq!(
            toks("Would you like to travel to Paris ?"),
            ["would", "you", "like", "to", "travel", "to", "paris", "?"]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(toks("").is_empty());
        assert!(toks("  \t\n ").is_empty());
    }

    #[test]
    fn apostrophes_and_attached_punctuation() {
        assert_eq!(toks("don't"), ["don", "'", "t"]);
        assert_eq!(toks("Paris?!"), ["paris", "?", "!"]);
        assert_eq!(toks("i ’ m  sorry"), ["i", "’", "m", "sorry"]);
        assert_eq!(toks("sept 13th"), ["sept", "13th"]);
    }
}
