use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dialog;
use crate::error::{Error, Result};

/// Splits whole dialogs into `(train, test)`.
///
/// Dialogs sharing any speaker tag are kept on the same side, so the split is
/// speaker-independent. Connected groups are shuffled with `seed` and assigned
/// to train while they fit under `round(fraction · n)`. Each side keeps the
/// original dialog order.
pub fn split_by_dialog(dialogs: Vec<Dialog>, fraction: f64, seed: u64) -> Result<(Vec<Dialog>, Vec<Dialog>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = dialogs.len();
    if n < 2 {
        return Err(Error::Config(format!("cannot split {n} dialog(s)")));
    }

    // Union-find over dialogs, joined through shared speaker tags.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (i, d) in dialogs.iter().enumerate() {
        for tag in d.utterances.iter().filter_map(|u| u.speaker_tag.as_deref()) {
            match owner.get(tag) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    owner.insert(tag, i);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let g = *group_of_root.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }

    let first_tag = |group: &[usize]| -> String {
        group
            .iter()
            .flat_map(|&i| dialogs[i].utterances.iter())
            .find_map(|u| u.speaker_tag.clone())
            .unwrap_or_default()
    };
    if groups.len() == 1 {
        return Err(Error::Split {
            tag: first_tag(&groups[0]),
            msg: "links every dialog into one speaker group".into(),
        });
    }

    let target = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);
    let mut in_train = vec![false; n];
    let mut train_count = 0;
    for g in &groups {
        if train_count + g.len() <= target {
            train_count += g.len();
            for &i in g {
                in_train[i] = true;
            }
        }
    }
    if train_count == 0 || train_count == n {
        let smallest = groups.iter().min_by_key(|g| g.len()).expect("at least two groups");
        return Err(Error::Split {
            tag: first_tag(smallest),
            msg: format!("groups are too large to place {target} of {n} dialogs in train"),
        });
    }

    let (mut train, mut test) = (Vec::with_capacity(train_count), Vec::with_capacity(n - train_count));
    for (d, t) in dialogs.into_iter().zip(in_train) {
        if t {
            train.push(d);
        } else {
            test.push(d);
        }
    }
    Ok((train, test))
}
