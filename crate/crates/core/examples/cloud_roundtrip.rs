//! Write a cloud as EMB1 and as CSV, then read both back.

use sidkit::cloud::{emb1_size, read_cloud, write_cloud, EmbeddingCloud};

fn main() {
    let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.5 * i as f64, -1.0]).collect();
    let cloud = EmbeddingCloud::from_rows("demo", &rows)
        .and_then(|c| c.with_tags(["grayscale-origin"]))
        .expect("valid cloud");

    let dir = std::env::temp_dir().join("sidkit-roundtrip");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let emb = dir.join("demo.emb");
    write_cloud(&cloud, &emb).expect("write EMB1");
    let back = read_cloud(&emb).expect("read EMB1");
    assert_eq!(back, cloud);

    let bytes = std::fs::metadata(&emb).expect("stat").len();
    let encoded_label = "demo#grayscale-origin".len();
    println!("{}: {} x {}, {bytes} bytes (layout says {})", back.label(), back.count(), back.dim(), emb1_size(encoded_label, 4, 3));
    println!("tags: {:?}", back.tags());

    let csv = dir.join("plain.csv");
    std::fs::write(&csv, "0.5,1.5\n2.5,3.5\n").expect("write CSV");
    let plain = read_cloud(&csv).expect("read CSV");
    println!("{}: {} x {}", plain.label(), plain.count(), plain.dim());
}
