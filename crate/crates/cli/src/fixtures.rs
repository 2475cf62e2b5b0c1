//! Inputs bundled with the binary, addressed as `builtin:<name>`.

use newhouse::Result;

/// Middle-thirds covers of [0, 3⁸] at depths 1..8; integer endpoints keep
/// every gap and bridge exact.
pub const MIDDLE_THIRDS: &str = "builtin:middle-thirds";
/// Twenty levels of m_l = 2, ε_l = 3^{-l}.
pub const THIRDS_SCHEDULE: &str = "builtin:thirds-schedule";

const BUNDLED: [(&str, &str); 2] = [
    (MIDDLE_THIRDS, include_str!("../fixtures/middle_thirds.csv")),
    (THIRDS_SCHEDULE, include_str!("../fixtures/thirds_schedule.json")),
];

pub fn is_builtin(name: &str) -> bool {
    BUNDLED.iter().any(|(n, _)| *n == name)
}

/// Contents of a bundled fixture or of a file.
pub fn load(name: &str) -> Result<String> {
    match BUNDLED.iter().find(|(n, _)| *n == name) {
        Some((_, text)) => Ok(text.to_string()),
        None => Ok(std::fs::read_to_string(name)?),
    }
}
