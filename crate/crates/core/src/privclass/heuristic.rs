//! Name-token heuristic for drafting rules. Its output never feeds reports
//! directly; a suggestion has to be promoted into a ruleset first.

use super::PrivacyCategory;
use crate::model::MethodRef;

/// Splits `setUserGender`, `set_user_gender`, `setHHIncome2` into lowercase
/// tokens.
pub fn tokenize(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        let boundary = match prev {
            Some(p) if c.is_uppercase() => {
                p.is_lowercase() || p.is_ascii_digit() || (p.is_uppercase() && next.is_some_and(char::is_lowercase))
            }
            Some(p) if c.is_ascii_digit() => !p.is_ascii_digit(),
            Some(p) => p.is_ascii_digit(),
            None => false,
        };
        if boundary && !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

const MAP_TYPES: [&str; 5] =
    ["Ljava/util/Map;", "Ljava/util/HashMap;", "Ljava/util/Hashtable;", "Ljava/util/TreeMap;", "Landroid/os/Bundle;"];

fn has(tokens: &[String], words: &[&str]) -> bool {
    tokens.iter().any(|t| words.contains(&t.as_str()))
}

fn has_prefix(tokens: &[String], prefixes: &[&str]) -> bool {
    tokens.iter().any(|t| prefixes.iter().any(|p| t.starts_with(p)))
}

fn adjacent(tokens: &[String], a: &str, b: &str) -> bool {
    tokens.windows(2).any(|w| w[0] == a && w[1] == b)
}

/// Suggests a category from the method name (and, for map-style and event
/// calls, its parameter types). Returns `(None, 0.0)` when nothing matches.
pub fn heuristic_suggest(method: &MethodRef) -> (Option<PrivacyCategory>, f64) {
    use PrivacyCategory::*;
    let t = tokenize(&method.method_name);
    let takes_map = method.param_descriptors.iter().any(|p| MAP_TYPES.contains(&p.as_str()));
    let takes_string = method.param_descriptors.iter().any(|p| p == "Ljava/lang/String;");
    let location = has(&t, &["location", "locations", "lat", "latitude", "lng", "lon", "longitude", "geo", "geolocation"]);

    let hit = if has(&t, &["demographic", "demographics", "extras"]) {
        if takes_map {
            Some((MultipleFactors, 0.85))
        } else {
            Some((MultipleFactors, 0.5))
        }
    } else if location && has(&t, &["enable", "enabled", "allow", "disable"]) {
        Some((EnableLocation, 0.9))
    } else if has(&t, &["gender", "sex"]) {
        Some((Gender, 0.95))
    } else if has(&t, &["age", "dob"]) || has_prefix(&t, &["birth"]) {
        Some((Age, 0.9))
    } else if location {
        Some((Location, 0.9))
    } else if has(&t, &["areacode"]) || adjacent(&t, "area", "code") {
        Some((AreaCode, 0.9))
    } else if has(&t, &["zip", "zipcode", "postal", "postalcode", "postcode"]) {
        Some((PostalCode, 0.9))
    } else if has(&t, &["income", "hhi"]) {
        Some((Income, 0.9))
    } else if has(&t, &["interest", "interests"]) {
        Some((Interests, 0.85))
    } else if has_prefix(&t, &["keyword"]) || has(&t, &["search"]) {
        Some((Keywords, 0.85))
    } else if has(&t, &["email"]) || adjacent(&t, "e", "mail") {
        Some((EMail, 0.9))
    } else if has(&t, &["country"]) {
        Some((Country, 0.9))
    } else if has_prefix(&t, &["ethnic"]) || has(&t, &["race"]) {
        Some((Ethnicity, 0.9))
    } else if has_prefix(&t, &["educat"]) {
        Some((Education, 0.9))
    } else if has(&t, &["event", "events", "log"]) && takes_string {
        Some((ArbitraryData, 0.7))
    } else if t.len() >= 2 && has(&t[..1], &["set", "add", "put"]) && t.last().is_some_and(|l| l == "name") {
        Some((Name, 0.6))
    } else {
        None
    };
    match hit {
        Some((c, conf)) => (Some(c), conf),
        None => (None, 0.0),
    }
}
