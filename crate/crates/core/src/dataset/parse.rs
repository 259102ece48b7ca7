use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{DatasetError, Gender, Interaction, UserRecord};

/// Result of parsing an interactions file.
#[derive(Debug, Clone, Default)]
pub struct ParsedInteractions {
    /// One record per (user, item) pair, in first-seen order.
    pub interactions: Vec<Interaction>,
    /// Non-blank lines that could not be parsed.
    pub malformed: usize,
    /// Non-blank lines read.
    pub lines: usize,
}

fn parse_line(line: &str) -> Option<(String, String, u64, Option<i64>)> {
    let fields: Vec<&str> = if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    };
    if !(3..=4).contains(&fields.len()) || fields[0].is_empty() || fields[1].is_empty() {
        return None;
    }
    let play_count = fields[2].parse::<u64>().ok()?;
    let timestamp = match fields.get(3) {
        Some(ts) if !ts.is_empty() => Some(ts.parse::<i64>().ok()?),
        _ => None,
    };
    Some((fields[0].to_string(), fields[1].to_string(), play_count, timestamp))
}

/// Parses `user_id, item_id, play_count[, timestamp]` records, one per line.
///
/// Fields are tab-separated; lines without tabs are split on whitespace.
/// Duplicate (user, item) pairs are merged by summing play counts and keeping
/// the latest timestamp. Malformed lines are skipped and counted; if more
/// than half of the lines are malformed the input is rejected.
pub fn parse_interactions<R: BufRead>(source: R) -> Result<ParsedInteractions, DatasetError> {
    let mut out = ParsedInteractions::default();
    let mut slot: HashMap<(String, String), usize> = HashMap::new();
    for line in source.lines() {
        let line = line.map_err(|source| DatasetError::Io { what: "interactions".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.lines += 1;
        let Some((user_id, item_id, play_count, timestamp)) = parse_line(&line) else {
            out.malformed += 1;
            continue;
        };
        let key = (user_id, item_id);
        match slot.get(&key) {
            Some(&k) => {
                let rec = &mut out.interactions[k];
                rec.play_count += play_count;
                rec.timestamp = rec.timestamp.max(timestamp);
            }
            None => {
                slot.insert(key.clone(), out.interactions.len());
                out.interactions.push(Interaction {
                    user_id: key.0,
                    item_id: key.1,
                    play_count,
                    timestamp,
                });
            }
        }
    }
    if out.malformed * 2 > out.lines {
        return Err(DatasetError::WrongFormat { malformed: out.malformed, lines: out.lines });
    }
    if out.malformed > 0 {
        log::warn!("skipped {} malformed interaction lines of {}", out.malformed, out.lines);
    }
    Ok(out)
}

/// Parses `user_id, gender` records. A missing gender column is `Unknown`.
pub fn parse_users<R: BufRead>(source: R) -> Result<Vec<UserRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let mut users = Vec::new();
    for line in source.lines() {
        let line = line.map_err(|source| DatasetError::Io { what: "users".into(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let user_id = fields.next().unwrap_or_default().trim().to_string();
        let gender = Gender::parse(fields.next().unwrap_or_default());
        if !seen.insert(user_id.clone()) {
            return Err(DatasetError::DuplicateUser(user_id));
        }
        users.push(UserRecord { user_id, gender });
    }
    Ok(users)
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>, DatasetError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DatasetError::Io { what: format!("{what} file {}", path.display()), source })
}

pub fn read_interactions(path: &Path) -> Result<ParsedInteractions, DatasetError> {
    parse_interactions(open(path, "interactions")?)
}

pub fn read_users(path: &Path) -> Result<Vec<UserRecord>, DatasetError> {
    parse_users(open(path, "users")?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let p = parse_interactions("u1 i1 2\nu1 i1 3\n".as_bytes()).unwrap();
        assert_eq!(p.interactions.len(), 1);
        assert_eq!(p.interactions[0].play_count, 5);
        assert_eq!(p.malformed, 0);
    }

    #[test]
    fn empty_source_is_empty() {
        let p = parse_interactions("".as_bytes()).unwrap();
        assert!(p.interactions.is_empty());
        assert_eq!(p.lines, 0);
    }

    #[test]
    fn malformed_lines_are_counted() {
        let mut text: String = (0..10).map(|k| format!("u{k}\ti{k}\t{}\n", k + 1)).collect();
        text.push_str("u1\ti1\tnotanumber\n");
        let p = parse_interactions(text.as_bytes()).unwrap();
        assert_eq!(p.interactions.len(), 10);
        assert_eq!(p.malformed, 1);
    }

    #[test]
    fn mostly_malformed_is_wrong_format() {
        let text = "a,b,c\nd,e,f\nu1\ti1\t3\n";
        assert!(matches!(
            parse_interactions(text.as_bytes()),
            Err(DatasetError::WrongFormat { malformed: 2, lines: 3 })
        ));
    }

    #[test]
    fn timestamps_keep_the_latest() {
        let p = parse_interactions("u\ti\t1\t10\nu\ti\t1\t30\nu\ti\t1\t20\n".as_bytes()).unwrap();
        assert_eq!(p.interactions[0].timestamp, Some(30));
        assert_eq!(p.interactions[0].play_count, 3);
    }

    #[test]
    fn users_file() {
        let users = parse_users("a\tf\nb\tM\nc\tother\nd\t\ne\n".as_bytes()).unwrap();
        let genders: Vec<Gender> = users.iter().map(|u| u.gender).collect();
        assert_eq!(
            genders,
            vec![Gender::Female, Gender::Male, Gender::Unknown, Gender::Unknown, Gender::Unknown]
        );
        assert!(matches!(parse_users("a\tf\na\tm\n".as_bytes()), Err(DatasetError::DuplicateUser(_))));
    }

    #[test]
    fn unreadable_path() {
        assert!(matches!(
            read_interactions(Path::new("/definitely/not/here.tsv")),
            Err(DatasetError::Io { .. })
        ));
    }
}
