version = "1.0.0"
git_hash = "0000000"
format_version = 1
license_text = (
    "Licence can be found on:\n\nhttps://github.com/neuracrypt/neuraCrypt/blob/master/LICENSE"
)
patched_version = f"{version}-{git_hash}"
