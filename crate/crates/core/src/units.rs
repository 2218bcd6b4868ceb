//! Logarithmic unit conversions, used only at file and CLI boundaries.

/// dBm to watts: `10^((dBm - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Rounds a logarithmic value to 1e-9 for emission, so that a value that came
/// from a decimal file entry survives a load/emit/load cycle unchanged.
pub(crate) fn tidy_log(value: f64) -> f64 {
    let r = (value * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
