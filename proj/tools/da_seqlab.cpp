#include "seqlab/pipeline.hpp"

int main(int argc, char** argv) {
    return seqlab::cli::main(argc, argv);
}
