// Criterion 7: end-to-end determinism through the command-line tool.
// Two fresh pipelines (dataset generation, 200 training steps,
// translation, quality score) run with the same seeds must produce
// byte-identical metrics logs, translated images, and score reports.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "acceptance.hpp"

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DSMAP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<unreadable:" + path + ">";
    return std::string(std::istreambuf_iterator<char>(in), {});
}

const char* kTinyModel =
    " --set model.image_size=16 --set model.base_channels=4"
    " --set model.n_res_shared=1 --set model.n_res_mapping=1"
    " --set model.style_dim=3 --set model.n_gen_res=1 --set model.disc_layers=2";

bool run_pipeline(acceptance::Criterion& crit, const std::string& root) {
    const std::string toy = root + "/toy";
    const std::string run = root + "/run";
    const std::string out = root + "/out";
    bool ok = true;
    ok &= crit.check(run_cli("make-toy --out " + toy + " --n 8 --size 16 --seed 3") == 0,
                     "make-toy failed in " + root);
    ok &= crit.check(run_cli("train --data " + toy + " --out " + run + " --seed 5" + kTinyModel +
                             " --set train.steps=200 --set train.checkpoint_every=200") == 0,
                     "train failed in " + root);
    const std::string ckpt = " --checkpoint " + run + "/ckpt_final.ckpt";
    ok &= crit.check(run_cli("translate" + ckpt + " --data " + toy + " --out " + out +
                             " --n 2 --n-styles 2 --seed 7") == 0,
                     "translate failed in " + root);
    ok &= crit.check(run_cli("eval-fid" + ckpt + " --data " + toy + " --out " + out +
                             " --seed 9 --set eval.n_content=2 --set eval.n_styles=2"
                             " --set eval.repeats=2") == 0,
                     "eval-fid failed in " + root);
    return ok;
}

}  // namespace

int main() {
    acceptance::TempDir dir("c7");
    acceptance::Criterion crit(7, "identical seeds reproduce the full pipeline byte for byte");

    const std::string first = dir.str() + "/first";
    const std::string second = dir.str() + "/second";
    const bool ran = run_pipeline(crit, first) & run_pipeline(crit, second);

    if (ran) {
        const char* files[] = {"/run/metrics.log",
                               "/run/ckpt_final.ckpt",
                               "/out/sampled_grid_seed7.png",
                               "/out/sampled_t00_seed7.png",
                               "/out/sampled_t01_seed7.png",
                               "/out/fid_report.txt"};
        for (const char* f : files) {
            const std::string a = slurp(first + f);
            const std::string b = slurp(second + f);
            crit.check(a.rfind("<unreadable:", 0) != 0, std::string("missing output ") + f);
            crit.check(a == b, std::string(f) + " differs between runs");
        }
    }

    return crit.finish();
}
