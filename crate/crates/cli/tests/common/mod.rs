#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const HEADER: &str = "CID|TYPE|FIRST_NAME|LAST_NAME|COMPANY_NAME|STREET|TOWN|ZIP|COUNTRY_CODE|COUNTRY";

/// Three small databases holding the name-tree and inverted-list examples.
pub fn write_fixture(dir: &Path) -> PathBuf {
    let files = [
        (
            "Abba",
            "abba.psv",
            "1234|I|John|Smith||123 Sunset||||\n\
             566|C|||ABC Capital New York Branch|||||US\n\
             392|C|||First America Bank Ltd Trust Account TA 101010|||||\n",
        ),
        (
            "Merlu",
            "merlu.psv",
            "112|I|Murphy|John||Avenue||||\n\
             1024|C|||FIRST AMERICA BANK LTD TRUST A/C TA 101010|||||\n",
        ),
        (
            "Skada",
            "skada.psv",
            "347|I|Peter|Chang||123||||\n\
             B123|C|||ABC CAPITAL GROUP|||||US\n",
        ),
    ];
    let mut cfg = String::new();
    for (fid, file, rows) in files {
        std::fs::write(dir.join(file), format!("{HEADER}\n{rows}")).unwrap();
        cfg.push_str(&format!("[[source]]\nfid = \"{fid}\"\npath = \"{file}\"\n\n"));
    }
    let path = dir.join("sources.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

pub fn cnindex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnindex"))
        .args(args)
        .env_remove("CNINDEX_SNAPSHOT")
        .env_remove("CNINDEX_SOURCES")
        .env_remove("CNINDEX_ABBREV")
        .env_remove("CNINDEX_AUDIT")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Build the fixture snapshot in `dir` and return its path.
pub fn built_fixture(dir: &Path) -> PathBuf {
    let cfg = write_fixture(dir);
    let snap = dir.join("index.cnix");
    let out = cnindex(&["build", "--sources", cfg.to_str().unwrap(), "--snapshot", snap.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    snap
}
