//! Thin wrapper over the `git` command-line client.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};

fn command(repo: &Path) -> Command {
    let mut cmd = Command::new("git");
    cmd.arg("-C")
        .arg(repo)
        .args(["-c", "core.quotepath=off", "-c", "color.ui=never"])
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("LC_ALL", "C");
    cmd
}

/// Runs `git <args>` inside `repo` and returns stdout.
pub fn run<I, S>(repo: &Path, args: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let args: Vec<_> = args.into_iter().map(|a| a.as_ref().to_owned()).collect();
    let output = command(repo).args(&args).output().map_err(|e| Error::Git {
        command: describe(&args),
        stderr: e.to_string(),
    })?;
    if !output.status.success() {
        return Err(Error::Git {
            command: describe(&args),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(output.stdout)
}

/// Like [`run`] but yields `None` instead of an error on a non-zero exit.
pub fn try_run<I, S>(repo: &Path, args: I) -> Result<Option<Vec<u8>>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    match run(repo, args) {
        Ok(out) => Ok(Some(out)),
        Err(Error::Git { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn describe(args: &[std::ffi::OsString]) -> String {
    args.iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One `(path, blob id)` entry of a tree listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEntry {
    pub path: String,
    pub blob: String,
}

/// Lists every blob reachable from `commit`'s tree whose path ends in `suffix`.
pub fn list_blobs(repo: &Path, commit: &str, suffix: &str) -> Result<Vec<TreeEntry>> {
    let out = run(repo, ["ls-tree", "-r", "-z", "--full-tree", commit])?;
    let mut entries = Vec::new();
    for record in out.split(|&b| b == 0).filter(|r| !r.is_empty()) {
        let record = String::from_utf8_lossy(record);
        // "<mode> SP <type> SP <object> TAB <path>"
        let Some((meta, path)) = record.split_once('\t') else {
            continue;
        };
        let mut meta = meta.split(' ');
        let (_mode, kind, blob) = (meta.next(), meta.next(), meta.next());
        if kind != Some("blob") || !path.ends_with(suffix) {
            continue;
        }
        if let Some(blob) = blob {
            entries.push(TreeEntry {
                path: path.to_string(),
                blob: blob.to_string(),
            });
        }
    }
    Ok(entries)
}

/// Reads many blobs through a single `git cat-file --batch` process.
pub fn read_blobs(repo: &Path, blobs: &[String]) -> Result<Vec<Vec<u8>>> {
    if blobs.is_empty() {
        return Ok(Vec::new());
    }
    let mut child = command(repo)
        .args(["cat-file", "--batch"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let requests: Vec<u8> = blobs.iter().flat_map(|b| format!("{b}\n").into_bytes()).collect();
    let writer = std::thread::spawn(move || stdin.write_all(&requests));

    let mut reader = BufReader::new(child.stdout.take().expect("piped stdout"));
    let mut contents = Vec::with_capacity(blobs.len());
    let mut header = String::new();
    for blob in blobs {
        header.clear();
        reader.read_line(&mut header)?;
        // "<oid> <type> <size>" or "<oid> missing"
        let size = header
            .trim_end()
            .rsplit(' ')
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Git {
                command: "cat-file --batch".into(),
                stderr: format!("unexpected header for {blob}: {}", header.trim_end()),
            })?;
        let mut buf = vec![0u8; size];
        reader.read_exact(&mut buf)?;
        let mut newline = [0u8; 1];
        reader.read_exact(&mut newline)?;
        contents.push(buf);
    }
    writer.join().expect("writer thread")?;
    child.wait()?;
    Ok(contents)
}
