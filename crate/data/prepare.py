"""Regenerate the bundled CSV datasets from locally installed Python packages.

Sources (all redistributions of UCI repository data):
  iris, wine, diabetes  -> scikit-learn bundled copies
  glass                 -> MASS::fgl via the `pydataset` sdist
  auto_mpg              -> `mlxtend` bundled copy (392 complete rows)
  sonar, wdbc, pima     -> KEEL copies shipped in the `keel-ds` wheel
  ecoli                 -> reassembled from the KEEL one-vs-rest ecoli files

Usage: python prepare.py <dir with downloaded wheels/sdists>
"""
import csv
import gzip
import io
import os
import sys
import tarfile
import zipfile

import sklearn

HERE = os.path.dirname(os.path.abspath(__file__))
SK = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "data")


def write(name, header, rows):
    with open(os.path.join(HERE, name + ".csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def sk_table(fname, names, classes):
    with open(os.path.join(SK, fname)) as f:
        lines = f.read().strip().splitlines()[1:]
    rows = []
    for line in lines:
        p = line.split(",")
        rows.append(p[:-1] + [classes[int(p[-1])]])
    return rows


def keel(zf, path):
    rows = []
    for line in zf.read(path).decode().splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([s.strip() for s in line.split(",")])
    return rows


def main(dl):
    iris_cols = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    write("iris", iris_cols + ["species"],
          sk_table("iris.csv", iris_cols, ["setosa", "versicolor", "virginica"]))

    wine_cols = ["alcohol", "malic_acid", "ash", "alcalinity", "magnesium", "phenols",
                 "flavanoids", "nonflavanoid", "proanthocyanins", "color", "hue",
                 "od280_od315", "proline"]
    write("wine", wine_cols + ["cultivar"],
          sk_table("wine_data.csv", wine_cols, ["c1", "c2", "c3"]))

    with gzip.open(os.path.join(SK, "diabetes_data_raw.csv.gz"), "rt") as f:
        x = [l.split() for l in f.read().strip().splitlines()]
    with gzip.open(os.path.join(SK, "diabetes_target.csv.gz"), "rt") as f:
        y = f.read().split()
    write("diabetes_progression",
          ["age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6", "progression"],
          [a + [b] for a, b in zip(x, y)])

    sd = tarfile.open(os.path.join(dl, "pydataset-0.2.0.tar.gz"))
    res = tarfile.open(fileobj=sd.extractfile("pydataset-0.2.0/pydataset/resources.tar.gz"))
    fgl = list(csv.reader(io.TextIOWrapper(res.extractfile("resources/rdata/csv/MASS/fgl.csv"))))
    write("glass", fgl[0][1:], [r[1:] for r in fgl[1:]])

    mx = zipfile.ZipFile(os.path.join(dl, "mlxtend-0.24.0-py3-none-any.whl"))
    auto = gzip.decompress(mx.read("mlxtend/data/data/autompg.csv.gz")).decode()
    rows = []
    for r in csv.reader(auto.strip().splitlines()):
        # drop the free-text car name
        rows.append(r[:7] + [r[8]])
    write("auto_mpg", ["cylinders", "displacement", "horsepower", "weight",
                       "acceleration", "model_year", "origin", "mpg"], rows)

    kz = zipfile.ZipFile(os.path.join(dl, "keel_ds-0.2.5-py3-none-any.whl"))
    base = "keel_ds/data/balanced/raw/"
    sonar = keel(kz, base + "sonar.dat")
    write("sonar", ["band%02d" % (i + 1) for i in range(60)] + ["object"], sonar)
    wdbc = keel(kz, base + "wdbc.dat")
    write("wdbc", ["f%02d" % (i + 1) for i in range(30)] + ["diagnosis"], wdbc)
    pima = keel(kz, base + "pima.dat")
    write("pima", ["pregnancies", "glucose", "pressure", "skin", "insulin", "bmi",
                   "pedigree", "age", "outcome"], pima)

    # KEEL keeps ecoli sorted by class: cp, im, imS, imL, imU, om, omL, pp.
    e1 = keel(kz, "keel_ds/data/imbalanced/raw/ecoli1.dat")
    spans = [("cp", 143), ("im", 77), ("imS", 2), ("imL", 2), ("imU", 35),
             ("om", 20), ("omL", 5), ("pp", 52)]
    labels = [name for name, n in spans for _ in range(n)]
    assert len(labels) == len(e1) == 336
    assert all((r[-1] == "positive") == (l == "im") for r, l in zip(e1, labels))
    write("ecoli", ["mcg", "gvh", "lip", "chg", "aac", "alm1", "alm2", "site"],
          [r[:-1] + [l] for r, l in zip(e1, labels)])


if __name__ == "__main__":
    main(sys.argv[1])
