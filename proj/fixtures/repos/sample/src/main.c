#include <stdio.h>
#include <string.h>

#include "greet.h"

int main(int argc, char **argv) {
  char name[16];
  if (argc < 2) {
    fprintf(stderr, "usage: greet NAME\n");
    return 1;
  }
  strcpy(name, argv[1]);
  greet(name);
  return 0;
}
