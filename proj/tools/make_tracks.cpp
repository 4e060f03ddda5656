// Regenerates the committed track files under tracks/.
#include <cstdio>
#include <filesystem>
#include <string>

#include "racer/track.hpp"

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "tracks";
  std::filesystem::create_directories(dir);
  racer::Track::oval().save(dir + "/oval.trk");
  racer::Track::chicane_course().save(dir + "/chicane.trk");
  racer::Track::mixed_circuit().save(dir + "/mixed.trk");
  std::printf("wrote oval.trk, chicane.trk, mixed.trk to %s/\n", dir.c_str());
  return 0;
}
