import os

from latent_dim import File, load_file_repository

repo = load_file_repository("local:/tmp/file_data")

# Save content in the repository
file_ = repo.save(File.from_content("sweep/report.csv", "n,e_ae\n1,0.5\n"))
assert file_.path == "/tmp/file_data/sweep/report.csv"
assert os.path.isfile(file_.path)
print(file_.checksum)

# Load the content from the repository
file_ = repo.load(File(path="sweep/report.csv"))
assert file_.content == "n,e_ae\n1,0.5\n"
assert repo.list_files("sweep") == ["sweep/report.csv"]

# Remove the file content from the repository
repo.delete(file_)
assert not repo.exists("sweep/report.csv")
