//! Display names and ordering for the eight benchmark subsets.

/// Canonical table order.
pub const CANONICAL_SUBSETS: [&str; 8] = [
    "WSJ",
    "ATIS",
    "CHiME-4",
    "Tedlium-3",
    "CV-accent",
    "SwitchBoard",
    "LRS2",
    "CORAAL",
];

fn squash(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Maps common spellings and release file stems (e.g. `td3`, `swbd`,
/// `chime4`) to the canonical name. Unknown names come back unchanged.
pub fn canonical_subset_name(name: &str) -> String {
    let key = squash(name);
    let key = key
        .strip_suffix("train")
        .or_else(|| key.strip_suffix("test"))
        .unwrap_or(&key);
    let canon = match key {
        "wsj" | "wsjscore" => "WSJ",
        "atis" => "ATIS",
        "chime4" | "chime" => "CHiME-4",
        "tedlium3" | "td3" | "tedlium" => "Tedlium-3",
        "cvaccent" | "cv" | "commonvoice" => "CV-accent",
        "switchboard" | "swbd" => "SwitchBoard",
        "lrs2" => "LRS2",
        "coraal" => "CORAAL",
        _ => return name.to_string(),
    };
    canon.to_string()
}

/// Position of `name` in the canonical order, if it is a benchmark subset.
pub fn canonical_rank(name: &str) -> Option<usize> {
    let canon = canonical_subset_name(name);
    CANONICAL_SUBSETS.iter().position(|c| *c == canon)
}

/// Distinct names, benchmark subsets first in canonical order, then others
/// in first-appearance order.
pub fn order_subset_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut distinct: Vec<String> = Vec::new();
    for n in names {
        if !distinct.iter().any(|d| d == n) {
            distinct.push(n.to_string());
        }
    }
    // stable sort keeps first-appearance order among unknown names
    distinct.sort_by_key(|n| canonical_rank(n).unwrap_or(usize::MAX));
    distinct
}
