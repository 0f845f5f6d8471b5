//! Parser for `s_time`-style summary output.
//!
//! Expected somewhere in the text, in order of appearance:
//!
//! ```text
//! <N> connections in <T>s; <C> connections/user sec, bytes read <B>
//! <N> connections in <R> real seconds, <B> bytes read per connection
//! ```
//!
//! Returns (connections, connections per user-CPU second, real seconds),
//! with the connection count taken from the real-time line.

use super::TlsError;

fn parse_user_line(line: &str) -> Option<(u64, f64)> {
    // "<N> connections in <T>s; <C> connections/user sec, ..."
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 6 || tokens[1] != "connections" || tokens[2] != "in" {
        return None;
    }
    if !tokens[3].ends_with("s;") || !tokens[5].starts_with("connections/user") {
        return None;
    }
    let connections = tokens[0].parse::<u64>().ok()?;
    tokens[3].trim_end_matches("s;").parse::<f64>().ok()?;
    let user_cps = tokens[4].parse::<f64>().ok()?;
    Some((connections, user_cps))
}

fn parse_real_line(line: &str) -> Option<(u64, f64)> {
    // "<N> connections in <R> real seconds, ..."
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 6 || tokens[1] != "connections" || tokens[2] != "in" {
        return None;
    }
    if tokens[4] != "real" || !tokens[5].starts_with("second") {
        return None;
    }
    let connections = tokens[0].parse::<u64>().ok()?;
    let real_seconds = tokens[3].parse::<f64>().ok()?;
    Some((connections, real_seconds))
}

/// Extract (connections, user connections/sec, real seconds) from the two
/// summary lines. The first occurrence of each line wins.
pub fn parse_s_time(text: &str) -> Result<(u64, f64, f64), TlsError> {
    let mut user: Option<(u64, f64)> = None;
    let mut real: Option<(u64, f64)> = None;
    for line in text.lines() {
        if user.is_none() && line.contains("connections/user") {
            user = parse_user_line(line);
            if user.is_none() {
                return Err(TlsError::MalformedSTime(format!(
                    "unparseable user-time line: {line:?}"
                )));
            }
            continue;
        }
        if real.is_none() && line.contains(" real second") {
            real = parse_real_line(line);
            if real.is_none() {
                return Err(TlsError::MalformedSTime(format!(
                    "unparseable real-time line: {line:?}"
                )));
            }
        }
    }
    let (_, user_cps) =
        user.ok_or_else(|| TlsError::MalformedSTime("user-time summary line missing".into()))?;
    let (connections, real_seconds) =
        real.ok_or_else(|| TlsError::MalformedSTime("real-time summary line missing".into()))?;
    Ok((connections, user_cps, real_seconds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_fixture() {
        let text = "5109 connections in 7.55s; 676.69 connections/user sec, bytes read 0\n\
                    5109 connections in 31 real seconds, 0 bytes read per connection\n";
        assert_eq!(parse_s_time(text).unwrap(), (5109, 676.69, 31.0));
    }

    #[test]
    fn zero_connections() {
        let text = "0 connections in 0.01s; 0.00 connections/user sec, bytes read 0\n\
                    0 connections in 30 real seconds, 0 bytes read per connection\n";
        assert_eq!(parse_s_time(text).unwrap(), (0, 0.0, 30.0));
    }

    #[test]
    fn tolerates_surrounding_noise() {
        let text = "Collecting connection statistics for 30 seconds\n\
                    ***********\n\
                    4186 connections in 6.1s; 686.23 connections/user sec, bytes read 0\n\
                    4186 connections in 31 real seconds, 0 bytes read per connection\n\
                    \n";
        assert_eq!(parse_s_time(text).unwrap(), (4186, 686.23, 31.0));
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert_eq!(parse_s_time("").unwrap_err().code(), "MALFORMED_S_TIME");
        let only_user = "10 connections in 1.0s; 5.0 connections/user sec, bytes read 0\n";
        assert_eq!(
            parse_s_time(only_user).unwrap_err().code(),
            "MALFORMED_S_TIME"
        );
        let bad_number = "x connections in 1.0s; 5.0 connections/user sec, bytes read 0\n\
                          10 connections in 30 real seconds, 0 bytes read per connection\n";
        assert_eq!(
            parse_s_time(bad_number).unwrap_err().code(),
            "MALFORMED_S_TIME"
        );
    }
}
