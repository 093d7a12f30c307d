#include <stdio.h>

#include "greet.h"

void greet(const char *name) {
  /* TODO: localise the greeting */
  printf("Hello, %s!\n", name);
}
