// Regenerates data/mammals_synthetic.csv, the bundled stand-in for the
// classic 100-species brain/body compilation (which is not redistributable
// here). Taxonomy and body masses are real-world plausible; log brain mass
// is simulated from a fixed three-component mixture of regressions on
// centered log body mass, so the generating structure is known exactly:
//
//   group 0 (28 species): intercept 3.55, slope 0.93   (steep)
//   group 1 (31 species): intercept 3.95, slope 0.70
//   group 2 (41 species): intercept 3.00, slope 0.70   (small brains)
//   shared residual sd 0.30, natural-log grams, seed 20260809
//
// The table spans 13 orders and 19 suborders; the three Cetacea belong to
// group 0.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <vector>

#include "anchormix/numerics.hpp"

namespace {

struct Row {
  const char* species;
  const char* order;
  const char* suborder;
  double body_g;
  int group;
};

const Row kRows[] = {
    // Rodentia / Sciuromorpha
    {"Sciurus carolinensis", "Rodentia", "Sciuromorpha", 530, 1},
    {"Tamias striatus", "Rodentia", "Sciuromorpha", 90, 1},
    {"Marmota monax", "Rodentia", "Sciuromorpha", 4000, 1},
    {"Cynomys ludovicianus", "Rodentia", "Sciuromorpha", 1000, 1},
    {"Glaucomys volans", "Rodentia", "Sciuromorpha", 65, 2},
    {"Spermophilus beecheyi", "Rodentia", "Sciuromorpha", 450, 2},
    {"Pedetes capensis", "Rodentia", "Sciuromorpha", 3000, 2},
    // Rodentia / Myomorpha
    {"Mus musculus", "Rodentia", "Myomorpha", 20, 2},
    {"Rattus norvegicus", "Rodentia", "Myomorpha", 280, 2},
    {"Mesocricetus auratus", "Rodentia", "Myomorpha", 120, 2},
    {"Microtus arvalis", "Rodentia", "Myomorpha", 35, 2},
    {"Meriones unguiculatus", "Rodentia", "Myomorpha", 70, 2},
    {"Peromyscus maniculatus", "Rodentia", "Myomorpha", 22, 2},
    {"Ondatra zibethicus", "Rodentia", "Myomorpha", 1200, 2},
    {"Jaculus jaculus", "Rodentia", "Myomorpha", 55, 2},
    {"Glis glis", "Rodentia", "Myomorpha", 120, 2},
    // Rodentia / Hystricomorpha
    {"Cavia porcellus", "Rodentia", "Hystricomorpha", 700, 2},
    {"Hydrochoerus hydrochaeris", "Rodentia", "Hystricomorpha", 50000, 2},
    {"Hystrix cristata", "Rodentia", "Hystricomorpha", 15000, 2},
    {"Erethizon dorsatum", "Rodentia", "Hystricomorpha", 7000, 2},
    {"Chinchilla lanigera", "Rodentia", "Hystricomorpha", 450, 2},
    {"Dasyprocta punctata", "Rodentia", "Hystricomorpha", 3000, 2},
    {"Myocastor coypus", "Rodentia", "Hystricomorpha", 6000, 2},
    {"Octodon degus", "Rodentia", "Hystricomorpha", 200, 2},
    // Primates / Anthropoidea
    {"Pan troglodytes", "Primates", "Anthropoidea", 45000, 0},
    {"Gorilla gorilla", "Primates", "Anthropoidea", 140000, 0},
    {"Pongo pygmaeus", "Primates", "Anthropoidea", 55000, 0},
    {"Hylobates lar", "Primates", "Anthropoidea", 6000, 0},
    {"Papio anubis", "Primates", "Anthropoidea", 25000, 0},
    {"Papio hamadryas", "Primates", "Anthropoidea", 20000, 0},
    {"Macaca mulatta", "Primates", "Anthropoidea", 7800, 0},
    {"Macaca fascicularis", "Primates", "Anthropoidea", 5500, 0},
    {"Cercopithecus aethiops", "Primates", "Anthropoidea", 4200, 0},
    {"Mandrillus sphinx", "Primates", "Anthropoidea", 20000, 0},
    {"Cebus capucinus", "Primates", "Anthropoidea", 3100, 0},
    {"Ateles geoffroyi", "Primates", "Anthropoidea", 8000, 0},
    {"Nasalis larvatus", "Primates", "Anthropoidea", 16000, 0},
    {"Saimiri sciureus", "Primates", "Anthropoidea", 750, 1},
    {"Callithrix jacchus", "Primates", "Anthropoidea", 320, 1},
    {"Saguinus oedipus", "Primates", "Anthropoidea", 500, 1},
    {"Aotus trivirgatus", "Primates", "Anthropoidea", 1000, 1},
    {"Erythrocebus patas", "Primates", "Anthropoidea", 9500, 1},
    // Primates / Prosimii
    {"Lemur catta", "Primates", "Prosimii", 2200, 1},
    {"Nycticebus coucang", "Primates", "Prosimii", 1100, 1},
    {"Galago senegalensis", "Primates", "Prosimii", 250, 1},
    // Artiodactyla / Ruminantia
    {"Giraffa camelopardalis", "Artiodactyla", "Ruminantia", 800000, 0},
    {"Cervus elaphus", "Artiodactyla", "Ruminantia", 200000, 0},
    {"Alces alces", "Artiodactyla", "Ruminantia", 450000, 0},
    {"Bison bison", "Artiodactyla", "Ruminantia", 700000, 0},
    {"Syncerus caffer", "Artiodactyla", "Ruminantia", 600000, 0},
    {"Bos taurus", "Artiodactyla", "Ruminantia", 465000, 1},
    {"Ovis aries", "Artiodactyla", "Ruminantia", 55000, 1},
    {"Capra hircus", "Artiodactyla", "Ruminantia", 40000, 1},
    {"Odocoileus virginianus", "Artiodactyla", "Ruminantia", 60000, 1},
    {"Rangifer tarandus", "Artiodactyla", "Ruminantia", 100000, 1},
    {"Antilocapra americana", "Artiodactyla", "Ruminantia", 50000, 1},
    {"Gazella dorcas", "Artiodactyla", "Ruminantia", 18000, 1},
    {"Connochaetes taurinus", "Artiodactyla", "Ruminantia", 200000, 1},
    {"Taurotragus oryx", "Artiodactyla", "Ruminantia", 500000, 1},
    {"Okapia johnstoni", "Artiodactyla", "Ruminantia", 230000, 1},
    // Artiodactyla / Suiformes
    {"Sus scrofa", "Artiodactyla", "Suiformes", 100000, 2},
    {"Phacochoerus africanus", "Artiodactyla", "Suiformes", 80000, 2},
    {"Hippopotamus amphibius", "Artiodactyla", "Suiformes", 1500000, 2},
    {"Tayassu tajacu", "Artiodactyla", "Suiformes", 25000, 2},
    // Artiodactyla / Tylopoda
    {"Camelus dromedarius", "Artiodactyla", "Tylopoda", 500000, 1},
    {"Lama glama", "Artiodactyla", "Tylopoda", 100000, 1},
    // Carnivora / Fissipeda
    {"Panthera leo", "Carnivora", "Fissipeda", 160000, 0},
    {"Canis lupus", "Carnivora", "Fissipeda", 36000, 0},
    {"Ursus arctos", "Carnivora", "Fissipeda", 250000, 0},
    {"Crocuta crocuta", "Carnivora", "Fissipeda", 60000, 0},
    {"Felis catus", "Carnivora", "Fissipeda", 3300, 1},
    {"Vulpes vulpes", "Carnivora", "Fissipeda", 5000, 1},
    {"Procyon lotor", "Carnivora", "Fissipeda", 6000, 1},
    {"Mustela nivalis", "Carnivora", "Fissipeda", 60, 1},
    // Insectivora / Lipotyphla
    {"Erinaceus europaeus", "Insectivora", "Lipotyphla", 750, 2},
    {"Talpa europaea", "Insectivora", "Lipotyphla", 90, 2},
    {"Sorex araneus", "Insectivora", "Lipotyphla", 8, 2},
    {"Suncus murinus", "Insectivora", "Lipotyphla", 50, 2},
    {"Tenrec ecaudatus", "Insectivora", "Lipotyphla", 900, 2},
    {"Condylura cristata", "Insectivora", "Lipotyphla", 50, 2},
    // Cetacea / Odontoceti
    {"Tursiops truncatus", "Cetacea", "Odontoceti", 160000, 0},
    {"Phocoena phocoena", "Cetacea", "Odontoceti", 53000, 0},
    {"Globicephala melas", "Cetacea", "Odontoceti", 800000, 0},
    // Chiroptera
    {"Pteropus giganteus", "Chiroptera", "Megachiroptera", 1000, 0},
    {"Myotis lucifugus", "Chiroptera", "Microchiroptera", 8, 2},
    {"Eptesicus fuscus", "Chiroptera", "Microchiroptera", 15, 2},
    // Perissodactyla / Hippomorpha
    {"Equus caballus", "Perissodactyla", "Hippomorpha", 521000, 1},
    {"Equus burchelli", "Perissodactyla", "Hippomorpha", 300000, 1},
    {"Equus asinus", "Perissodactyla", "Hippomorpha", 187000, 1},
    // Lagomorpha / Duplicidentata
    {"Oryctolagus cuniculus", "Lagomorpha", "Duplicidentata", 2500, 2},
    {"Lepus europaeus", "Lagomorpha", "Duplicidentata", 4000, 2},
    {"Ochotona princeps", "Lagomorpha", "Duplicidentata", 150, 2},
    // Edentata / Xenarthra
    {"Dasypus novemcinctus", "Edentata", "Xenarthra", 4000, 2},
    {"Bradypus tridactylus", "Edentata", "Xenarthra", 4000, 2},
    {"Myrmecophaga tridactyla", "Edentata", "Xenarthra", 30000, 2},
    // Proboscidea / Elephantoidea
    {"Loxodonta africana", "Proboscidea", "Elephantoidea", 2800000, 0},
    {"Elephas maximus", "Proboscidea", "Elephantoidea", 2547000, 0},
    // Sirenia / Trichechiformes
    {"Trichechus manatus", "Sirenia", "Trichechiformes", 450000, 2},
    {"Dugong dugon", "Sirenia", "Trichechiformes", 300000, 2},
    // Hyracoidea
    {"Procavia capensis", "Hyracoidea", "Procaviidae", 3600, 2},
};

constexpr double kIntercept[3] = {3.55, 3.95, 3.00};
constexpr double kSlope[3] = {0.93, 0.70, 0.70};
constexpr double kSigma = 0.30;
constexpr std::uint64_t kSeed = 20260809;

}  // namespace

int main(int argc, char** argv) {
  const std::string out_path = argc > 1 ? argv[1] : "data/mammals_synthetic.csv";
  const int n = static_cast<int>(std::size(kRows));

  double mean_log_body = 0.0;
  for (const Row& r : kRows) mean_log_body += std::log(r.body_g);
  mean_log_body /= n;

  anchormix::RngStream rng(kSeed);
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  out << "species,order,suborder,body_mass,brain_mass\n";
  std::vector<int> group_sizes(3, 0);
  for (const Row& r : kRows) {
    const double c = std::log(r.body_g) - mean_log_body;
    const double log_brain = rng.normal(kIntercept[r.group] + kSlope[r.group] * c, kSigma * kSigma);
    char brain[32], body[32];
    std::snprintf(brain, sizeof brain, "%.5g", std::exp(log_brain));
    std::snprintf(body, sizeof body, "%.10g", r.body_g);
    out << r.species << "," << r.order << "," << r.suborder << "," << body << "," << brain
        << "\n";
    ++group_sizes[r.group];
  }
  std::cout << "wrote " << out_path << " (" << n << " species; group sizes " << group_sizes[0]
            << "/" << group_sizes[1] << "/" << group_sizes[2] << ")\n";
  return 0;
}
