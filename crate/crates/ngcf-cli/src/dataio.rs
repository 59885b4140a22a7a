//! Reading raw interaction files and round-tripping prepared dataset
//! directories (train.txt / valid.txt / test.txt + stats.json).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ngcf_core::dataset::{load_interactions, InputFormat, InteractionDataset, RawInteractions};
use ngcf_core::{Error, Result};

pub const TRAIN_FILE: &str = "train.txt";
pub const VALID_FILE: &str = "valid.txt";
pub const TEST_FILE: &str = "test.txt";
pub const STATS_FILE: &str = "stats.json";

fn read_err(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("cannot read {}: {e}", path.display()))
}

fn write_err(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("cannot write {}: {e}", path.display()))
}

/// Parses a raw interaction file in the given format.
pub fn read_raw(path: &Path, format: InputFormat) -> Result<RawInteractions> {
    let text = std::fs::read_to_string(path).map_err(|e| read_err(path, e))?;
    load_interactions(&text, format)
}

/// Original string ids ordered by internal index.
pub fn names_by_index(map: &BTreeMap<String, usize>, len: usize) -> Vec<&str> {
    let mut names = vec![""; len];
    for (name, &idx) in map {
        names[idx] = name;
    }
    names
}

fn write_grouped(
    path: &Path,
    lists: &[Vec<usize>],
    users: &[&str],
    items: &[&str],
) -> Result<()> {
    let mut out = String::new();
    for (u, list) in lists.iter().enumerate() {
        out.push_str(users[u]);
        let mut names: Vec<&str> = list.iter().map(|&i| items[i]).collect();
        // Canonical name order makes a write-load-write cycle byte-stable
        // even though loading re-derives the dense indices.
        names.sort_unstable();
        for name in names {
            let _ = write!(out, " {name}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| write_err(path, e))
}

/// Writes the three grouped split files plus interaction counts. Users keep
/// their file order (internal index order), so reloading the directory
/// reproduces the same indexing.
pub fn write_split(ds: &InteractionDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let users = names_by_index(&ds.user_map, ds.n_users);
    let items = names_by_index(&ds.item_map, ds.n_items);
    write_grouped(&dir.join(TRAIN_FILE), &ds.train, &users, &items)?;
    write_grouped(&dir.join(VALID_FILE), &ds.validation, &users, &items)?;
    write_grouped(&dir.join(TEST_FILE), &ds.test, &users, &items)?;

    let (n_train, n_valid, n_test) = ds.counts();
    let stats = serde_json::json!({
        "n_users": ds.n_users,
        "n_items": ds.n_items,
        "n_train": n_train,
        "n_valid": n_valid,
        "n_test": n_test,
    });
    let path = dir.join(STATS_FILE);
    let mut text = serde_json::to_string_pretty(&stats)
        .map_err(|e| Error::Data(format!("cannot encode stats: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| write_err(&path, e))
}

fn parse_grouped_into(
    path: &Path,
    user_map: &BTreeMap<String, usize>,
    item_map: &BTreeMap<String, usize>,
    n_users: usize,
) -> Result<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path).map_err(|e| read_err(path, e))?;
    let mut lists = vec![Vec::new(); n_users];
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim_end_matches('\r');
        let mut tokens = line.split_whitespace();
        let Some(user) = tokens.next() else { continue };
        let &u = user_map.get(user).ok_or_else(|| {
            Error::Data(format!("{}: user '{user}' not in training split", path.display()))
        })?;
        for token in tokens {
            let &i = item_map.get(token).ok_or_else(|| {
                Error::Data(format!(
                    "{}:{}: item '{token}' not in training split",
                    path.display(),
                    idx + 1
                ))
            })?;
            lists[u].push(i);
        }
    }
    for list in &mut lists {
        list.sort_unstable();
    }
    Ok(lists)
}

/// Loads a prepared directory. Users and items are indexed by first
/// appearance in train.txt; validation and test entries must reference
/// known users and items.
pub fn load_prepared(dir: &Path) -> Result<InteractionDataset> {
    let train_path = dir.join(TRAIN_FILE);
    let text = std::fs::read_to_string(&train_path).map_err(|e| read_err(&train_path, e))?;

    let mut user_map: BTreeMap<String, usize> = BTreeMap::new();
    let mut item_map: BTreeMap<String, usize> = BTreeMap::new();
    let mut train: Vec<Vec<usize>> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim_end_matches('\r');
        let mut tokens = line.split_whitespace();
        let Some(user) = tokens.next() else { continue };
        if user_map.contains_key(user) {
            return Err(Error::Data(format!(
                "{}:{}: user '{user}' appears twice",
                train_path.display(),
                idx + 1
            )));
        }
        let u = train.len();
        user_map.insert(user.to_string(), u);
        train.push(Vec::new());
        for token in tokens {
            let next = item_map.len();
            let i = *item_map.entry(token.to_string()).or_insert(next);
            train[u].push(i);
        }
    }
    if train.is_empty() {
        return Err(Error::Data(format!("{}: no users", train_path.display())));
    }
    let n_users = train.len();
    let n_items = item_map.len();
    for list in &mut train {
        list.sort_unstable();
    }

    let validation = parse_grouped_into(&dir.join(VALID_FILE), &user_map, &item_map, n_users)?;
    let test = parse_grouped_into(&dir.join(TEST_FILE), &user_map, &item_map, n_users)?;

    let ds = InteractionDataset {
        n_users,
        n_items,
        train,
        validation,
        test,
        user_map,
        item_map,
    };
    ds.validate()?;
    Ok(ds)
}
