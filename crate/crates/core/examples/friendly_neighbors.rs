//! Rank source datasets for each target from the bundled Table 1 values.

use sidkit::ranking::{rank_single, rank_vote, Metric, MetricTable};

fn main() {
    let table = MetricTable::from_csv_reader(include_str!("../data/table1.csv").as_bytes()).expect("fixture");
    for target in ["MNIST", "CIFAR-10", "TinyImageNet", "Ukiyo-E"] {
        let by_fid = rank_single(&table, target, Metric::Fid).expect("fid ranking");
        let by_csid = rank_single(&table, target, Metric::Csid).expect("csid ranking");
        println!("{target:<13} FID {:?}", by_fid.top(3));
        println!("{:<13} CSID {:?}", "", by_csid.top(3));
    }

    let vote = rank_vote(&table, "CIFAR-10", &[Metric::Fid, Metric::Csid]).expect("vote");
    print!("{}", vote.to_csv());
}
