//! Search-query generation and the final per-track image check, both driven
//! by a text-generation backend.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::BackendError;
use crate::gateway::Gateway;
use crate::protocol::Image;

pub fn breed_prompt(n: usize, category: &str) -> String {
    format!("List {n} types of {category}. Only show the list in python list format without using a code block.")
}

pub fn context_prompt(n: usize, category: &str) -> String {
    format!(
        "List {n} search phrases or autocompletions for searching {category} videos on a video sharing website. \
         Assume user already input the word {category}, only show the trailing phrases. \
         Only show the list in python list format without using a code block."
    )
}

pub fn image_check_prompt(category: &str) -> String {
    format!("Does this image show a realistic photo of a {category} without any occlusion? Answer yes or no only.")
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not parse a list from backend output ({reason}): {raw:?}")]
    Parse { reason: String, raw: String },
}

/// Parses a Python list of string literals such as `['a', "b",]`.
pub fn parse_python_list(raw: &str) -> Result<Vec<String>, QueryError> {
    let fail = |reason: &str| QueryError::Parse {
        reason: reason.to_string(),
        raw: raw.to_string(),
    };
    let body = raw
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| fail("not enclosed in brackets"))?;
    let mut out = Vec::new();
    let mut chars = body.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        let Some(quote) = chars.next() else { break };
        if quote != '\'' && quote != '"' {
            return Err(fail("expected a quoted string"));
        }
        let mut item = String::new();
        loop {
            match chars.next() {
                None => return Err(fail("unterminated string")),
                Some('\\') => match chars.next() {
                    Some('n') => item.push('\n'),
                    Some('t') => item.push('\t'),
                    Some(c) => item.push(c),
                    None => return Err(fail("dangling escape")),
                },
                Some(c) if c == quote => break,
                Some(c) => item.push(c),
            }
        }
        out.push(item.trim().to_string());
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        match chars.next() {
            None => break,
            Some(',') => {}
            Some(_) => return Err(fail("expected ',' between items")),
        }
    }
    if out.is_empty() {
        return Err(fail("empty list"));
    }
    Ok(out)
}

/// Every "{breed} {context}" combination, shuffled deterministically by `seed`.
pub fn combine_queries(breeds: &[String], contexts: &[String], seed: u64) -> Vec<String> {
    let mut queries: Vec<String> = breeds
        .iter()
        .flat_map(|b| contexts.iter().map(move |c| format!("{b} {c}")))
        .collect();
    queries.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    queries
}

/// Asks the text backend for breeds and search contexts of `category` and
/// combines them into search queries.
pub fn generate_queries(
    gateway: &Gateway,
    category: &str,
    n_breeds: usize,
    n_contexts: usize,
    seed: u64,
) -> Result<Vec<String>, QueryError> {
    let breeds = parse_python_list(&gateway.text_generate(&breed_prompt(n_breeds, category), None)?)?;
    let contexts = parse_python_list(&gateway.text_generate(&context_prompt(n_contexts, category), None)?)?;
    Ok(combine_queries(&breeds, &contexts, seed))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageCheck {
    pub accept: bool,
    /// The answer was neither yes nor no.
    pub garbled: bool,
    pub answer: String,
}

pub fn interpret_yes_no(answer: &str) -> Option<bool> {
    let word = answer
        .trim()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_ascii_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Asks whether `image` shows an unoccluded, realistic `category`. Anything
/// but a clear yes rejects.
pub fn final_image_check(gateway: &Gateway, image: Image, category: &str) -> Result<ImageCheck, BackendError> {
    let answer = gateway.text_generate(&image_check_prompt(category), Some(image))?;
    let verdict = interpret_yes_no(&answer);
    if verdict.is_none() {
        log::warn!("unparseable image-check answer treated as reject: {answer:?}");
    }
    Ok(ImageCheck {
        accept: verdict == Some(true),
        garbled: verdict.is_none(),
        answer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_python_lists() {
        assert_eq!(
            parse_python_list("['Arabian horse', \"Shetland pony\",  'it\\'s' ,]").unwrap(),
            ["Arabian horse", "Shetland pony", "it's"]
        );
        assert_eq!(parse_python_list(" [ 'a' ]\n").unwrap(), ["a"]);
        for bad in ["", "a, b", "['a' 'b']", "['a", "[]", "[a]"] {
            match parse_python_list(bad) {
                Err(QueryError::Parse { raw, .. }) => assert_eq!(raw, bad),
                other => panic!("{bad:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn yes_no_parsing() {
        assert_eq!(interpret_yes_no("Yes."), Some(true));
        assert_eq!(interpret_yes_no(" no\n"), Some(false));
        assert_eq!(interpret_yes_no("yes, mostly"), None);
        assert_eq!(interpret_yes_no("maybe"), None);
    }

    #[test]
    fn combination_is_a_seeded_permutation_of_the_product() {
        let b: Vec<String> = ["x", "y"].map(String::from).to_vec();
        let c: Vec<String> = ["1", "2", "3"].map(String::from).to_vec();
        let q = combine_queries(&b, &c, 7);
        assert_eq!(q, combine_queries(&b, &c, 7));
        let mut sorted = q.clone();
        sorted.sort();
        assert_eq!(sorted, ["x 1", "x 2", "x 3", "y 1", "y 2", "y 3"]);
    }
}
